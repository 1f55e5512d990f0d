"""Run each CLI subcommand twice on fixed inputs and collect the output trees."""

import contextlib
import io as _io
from pathlib import Path

from ast_attn.cli import main

PROMPT = 'd_c = 7\nsub = "red cube" 0 2\nsub = "blue ball" 2 4\nsub = "in a forest" 4 7 background\n'
PROMPT_B = 'd_c = 7\nsub = "green cone" 0 2\nsub = "pink star" 2 4\nsub = "in a desert" 4 7 background\n'
LEXICON = "red attribute\nblue attribute\ngreen attribute\npink attribute\ncube instance\nball instance\n" \
          "cone instance\nstar instance\nforest background\ndesert background\nin filler\na filler\n"
SKETCH = "1 1 0 0\n1 1 0 0\n0 0 2 2\n0 0 2 2\n"


def _tree(root: Path) -> dict:
    if root.is_file():
        return {root.name: root.read_bytes()}
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run_cli_twice(tmp: Path) -> dict:
    d = tmp / "inputs"
    d.mkdir()
    (d / "a.txt").write_text(PROMPT)
    (d / "b.txt").write_text(PROMPT_B)
    (d / "lex.txt").write_text(LEXICON)
    (d / "sketch.txt").write_text(SKETCH)
    common = ["--prompt", str(d / "a.txt"), "--lexicon", str(d / "lex.txt"),
              "--sketch", str(d / "sketch.txt"), "--latent", "4x4"]
    model = ["--steps", "3", "--seed", "5"]
    commands = {
        "masks": ["masks", *common],
        "run": ["run", *common, *model],
        "stats": ["stats", *common, *model, "--ranges", "1-2,3-5"],
        "exchange": ["exchange", "--prompt-a", str(d / "a.txt"), "--prompt-b", str(d / "b.txt"),
                     "--lexicon", str(d / "lex.txt"), "--latent", "4x4", *model,
                     "--classes", "instance,attribute", "--layers", "2-4", "--exchange-steps", "0-1"],
        "tune-demo": ["tune-demo", *common],
        "curve": ["curve", "--m", "1"],
    }
    trees = {}
    for name, argv in commands.items():
        pair = []
        for k in range(2):
            out = tmp / f"{name}-{k}"
            target = out / "curve.csv" if name == "curve" else out
            with contextlib.redirect_stderr(_io.StringIO()):
                code = main([*argv, "--out", str(target)])
            assert code == 0, f"{name} exited {code}"
            pair.append(_tree(target))
        trees[name] = tuple(pair)
    return trees
