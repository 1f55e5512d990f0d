import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ast_attn import io
from ast_attn.cli import main

PROMPT = """\
d_c = 7
sub = "red cube" 0 2
sub = "blue ball" 2 4
sub = "in a forest" 4 7 background
"""
PROMPT_B = PROMPT.replace("red cube", "green cone").replace("blue ball", "pink star")
LEXICON = "red attribute\nblue attribute\ngreen attribute\npink attribute\ncube instance\n" \
          "ball instance\ncone instance\nstar instance\nforest background\nin filler\na filler\n"
SKETCH = """\
1 1 1 0 0 0 0 0
1 1 1 0 0 0 0 0
1 1 1 0 0 0 0 0
0 0 0 0 0 2 2 2
0 0 0 0 0 2 2 2
0 0 0 0 0 2 2 2
0 0 0 0 0 0 0 0
0 0 0 0 0 0 0 0
"""


@pytest.fixture
def inputs(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    (d / "prompt.txt").write_text(PROMPT)
    (d / "prompt_b.txt").write_text(PROMPT_B)
    (d / "lexicon.txt").write_text(LEXICON)
    (d / "sketch.txt").write_text(SKETCH)
    return d


def _common(d):
    return ["--prompt", str(d / "prompt.txt"), "--lexicon", str(d / "lexicon.txt"),
            "--sketch", str(d / "sketch.txt"), "--latent", "4x4"]


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_masks(inputs, tmp_path):
    out = tmp_path / "m"
    assert main(["masks", *_common(inputs), "--out", str(out)]) == 0
    assert {"t2t.pgm", "i2i.pgm", "i2t.pgm", "latent_ids.pgm", "sensitivity.csv", "metadata.txt"} <= set(_tree(out))
    t2t = io.read_pgm(out / "t2t.pgm")
    assert t2t.shape == (7, 7) and t2t[0, 1] == 255 and t2t[0, 2] == 0
    assert io.read_pgm(out / "i2t.pgm").shape == (16, 7)
    meta = (out / "metadata.txt").read_text()
    assert "instances = 2" in meta and "token_classes = attribute,instance,attribute" in meta
    rows = io.read_csv(out / "sensitivity.csv")
    assert len(rows) == 16


def test_run_and_stats(inputs, tmp_path):
    out = tmp_path / "r"
    assert main(["run", *_common(inputs), "--out", str(out), "--steps", "3", "--capture-steps", "0-1"]) == 0
    files = _tree(out)
    assert "captures.csv" in files and "profile.txt" in files
    assert any(f.startswith("heatmaps/token_001_instance") for f in files)
    summary = (out / "summary.txt").read_text()
    assert "captures = 10" in summary
    err = float(summary.split("max_row_sum_error = ")[1].split()[0])
    assert err <= 1e-9
    out2 = tmp_path / "s"
    assert main(["stats", *_common(inputs), "--out", str(out2), "--steps", "3", "--ranges", "1-2,3-5"]) == 0
    rows = io.read_csv(out2 / "stats.csv")
    assert {r["range"] for r in rows} == {"1-2", "3-5"}


def test_exchange(inputs, tmp_path):
    out = tmp_path / "x"
    argv = ["exchange", "--prompt-a", str(inputs / "prompt.txt"), "--prompt-b", str(inputs / "prompt_b.txt"),
            "--lexicon", str(inputs / "lexicon.txt"), "--latent", "4x4", "--steps", "3",
            "--classes", "instance", "--layers", "1-5", "--exchange-steps", "0-1", "--out", str(out)]
    assert main(argv) == 0
    summary = (out / "summary.txt").read_text()
    assert "swapped_rows = 1,3" in summary
    assert (out / "shift_a.pgm").exists() and (out / "final_latent_b.csv").exists()


def test_curve_stdout(capsys):
    assert main(["curve", "--lambda", "4", "--T", "32", "--step", "0", "--m", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "a,value" and len(lines) == 102
    a, v = lines[21].split(",")
    assert float(a) == 0.2
    assert abs(float(v) - 4.9065060394218705) <= 1e-9


def test_tune_demo(inputs, tmp_path):
    out = tmp_path / "t"
    assert main(["tune-demo", *_common(inputs), "--out", str(out)]) == 0
    summary = dict(l.split(" = ") for l in (out / "summary.txt").read_text().splitlines())
    assert float(summary["i2t_mask_mass_after"]) > float(summary["i2t_mask_mass_before"])


def test_env_out_dir(inputs, tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("AST_ATTN_OUT", str(target))
    assert main(["masks", *_common(inputs)]) == 0
    assert (target / "metadata.txt").exists()


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["masks"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--prompt", "p", "--sketch", "s", "--latent", "axb"])
    assert exc.value.code == 2


def test_runtime_error_exit_1(inputs, tmp_path, capsys):
    (inputs / "gap.txt").write_text("1 3\n0 0\n")
    argv = ["masks", "--prompt", str(inputs / "prompt.txt"), "--sketch", str(inputs / "gap.txt"),
            "--latent", "2x2", "--out", str(tmp_path / "e")]
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error: NonContiguousIdsError:")


def test_missing_file_exit_1(tmp_path, capsys):
    assert main(["masks", "--prompt", str(tmp_path / "nope"), "--sketch", "x", "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_deterministic_output_trees(inputs, tmp_path):
    trees = []
    for k in range(2):
        out = tmp_path / f"d{k}"
        assert main(["run", *_common(inputs), "--out", str(out), "--steps", "2", "--seed", "3"]) == 0
        trees.append(_tree(out))
    assert trees[0] == trees[1]


def test_console_script_module(inputs, tmp_path):
    out = tmp_path / "sub"
    proc = subprocess.run([sys.executable, "-m", "ast_attn.cli", "masks", *_common(inputs), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "t2t.pgm").exists()
