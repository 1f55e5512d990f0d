"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import contextlib
import math
import time

import numpy as np

from ast_attn.analysis import extract_regions, scaling_curve
from ast_attn.core import row_softmax
from ast_attn.masks import Region, assemble, build_i2i, build_i2t, build_sensitivity, build_t2t
from ast_attn.mini_dit import MiniDitConfig, init_model, run, run_paired, swap_rows, token_exchange
from ast_attn.prompt import TokenClass, make_prompt_spec
from ast_attn.schedule import (
    Activation,
    activation_at,
    builtin_profile,
    default_profile,
    empty_profile,
    scale_profile,
)
from ast_attn.sketch import rect_sketch
from ast_attn.tuner import tune_attention
from cli_helpers import run_cli_twice
from oracles import i2i_predicate, i2t_predicate, monolithic_tune, random_instance, sensitivity_explicit, t2t_predicate

RESULTS: list[str] = []
SEED = 20240611
I, A, B, F = TokenClass.INSTANCE, TokenClass.ATTRIBUTE, TokenClass.BACKGROUND, TokenClass.FILLER


@contextlib.contextmanager
def criterion(n: int, title: str):
    try:
        yield
    except BaseException as exc:
        line = f"FAIL criterion {n:2d}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        RESULTS.append(line)
        print(line)
        raise
    line = f"PASS criterion {n:2d}: {title}"
    RESULTS.append(line)
    print(line)


def _instances(count=200):
    rng = np.random.default_rng(SEED)
    return [random_instance(rng, max_dc=16, max_side=8) for _ in range(count)]


def test_01_mask_oracle():
    with criterion(1, "masks equal brute-force membership on 200 random instances, < 10 s"):
        t0 = time.perf_counter()
        for spec, sketch in _instances():
            assert spec.d_c <= 16 and sketch.hw <= 64
            np.testing.assert_array_equal(build_t2t(spec).data, t2t_predicate(spec))
            np.testing.assert_array_equal(build_i2i(sketch).data, i2i_predicate(sketch))
            np.testing.assert_array_equal(build_i2t(spec, sketch).data, i2t_predicate(spec, sketch))
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"took {elapsed:.2f} s"


def test_02_sensitivity_oracle():
    with criterion(2, "sensitivity equals explicit L row-sum to 1e-12; 2x2-on-4x4 gives 0.0 / 0.75"):
        for _, sketch in _instances():
            g = build_sensitivity(sketch)
            gt, gi = sensitivity_explicit(sketch)
            np.testing.assert_allclose(g.g_text, gt, rtol=0, atol=1e-12)
            np.testing.assert_allclose(g.g_image, gi, rtol=0, atol=1e-12)
        g = build_sensitivity(rect_sketch(4, 4, [(0, 0, 2, 2)]))
        inside = rect_sketch(4, 4, [(0, 0, 2, 2)]).masks[0].ravel()
        assert np.all(g.g_text[inside] == 0.0)
        assert np.all(g.g_image[inside] == 0.75)


def test_03_monolithic_oracle():
    with criterion(3, "region-wise tuning equals full-matrix evaluation to 1e-12 on 100 random maps"):
        rng = np.random.default_rng(SEED + 3)
        classes = list(TokenClass)
        for k in range(100):
            spec, sketch = random_instance(rng, max_dc=8, max_side=5)
            mask = assemble(spec, sketch, float(rng.uniform(0, 6)), float(rng.uniform(0, 6)))
            g = build_sensitivity(sketch)
            attn = row_softmax(rng.normal(0, 2, (mask.size, mask.size)))
            regions = frozenset(r for r in (Region.T2T, Region.I2I) if rng.random() < 0.7)
            live = frozenset(c for c in classes if rng.random() < 0.7)
            act = Activation(regions, live)
            step = int(rng.integers(0, 32))
            out = tune_attention(attn, mask, g, act, 32, step)
            np.testing.assert_allclose(out, monolithic_tune(attn, mask, g, act, 32, step), rtol=0, atol=1e-12)


def _toy(n_double=2, n_single=3, steps=8, seed=0, h=4, w=4):
    spec = make_prompt_spec(7, [("red cube", 0, 2), ("blue ball", 2, 4), ("in a forest", 4, 7, True)],
                            {0: A, 1: I, 2: A, 3: I, 4: F, 5: F, 6: B})
    sketch = rect_sketch(h, w, [(0, 0, 2, 2), (2, 2, 2, 2)])
    cfg = MiniDitConfig(d_c=7, h=h, w=w, n_double=n_double, n_single=n_single, n_steps=steps, seed=seed)
    return init_model(cfg), spec, assemble(spec, sketch), build_sensitivity(sketch)


def test_04_row_stochastic():
    with criterion(4, "every tuned row of a 500-capture run sums to 1 within 1e-9"):
        model, spec, mask, g = _toy(n_double=4, n_single=6, steps=50)
        res = run(model, spec, mask, g, builtin_profile("full-layer", 10, 50), capture=True)
        assert len(res.captures) == 500
        assert all(c.tuned for c in res.captures)
        worst = max(float(np.abs(c.attention.sum(axis=1) - 1).max()) for c in res.captures)
        assert worst <= 1e-9, worst
        assert all(np.all(c.attention >= 0) for c in res.captures)


def test_05_gating_bit_exact():
    with criterion(5, "empty profile is byte-identical to untuned; maps outside the window are untouched"):
        model, spec, mask, g = _toy(steps=8)
        untuned = run(model, spec, capture=True)
        empty = run(model, spec, mask, g, empty_profile(5, 8), capture=True)
        assert untuned.final.checksum() == empty.final.checksum()
        assert all(a.attention.tobytes() == b.attention.tobytes()
                   for a, b in zip(untuned.captures, empty.captures))
        profile = scale_profile(default_profile(), 5, 8)
        assert profile.window_steps == 4
        tuned = run(model, spec, mask, g, profile, capture=True)
        outside = [c for c in tuned.captures if c.step >= profile.window_steps]
        assert len(outside) == 5 * 4
        for c in outside:
            assert not c.tuned and c.attention.tobytes() == c.raw.tobytes()
        assert any(c.tuned for c in tuned.captures if c.step < profile.window_steps)


def test_06_scaling_curve():
    with criterion(6, "curve at a=0.2 equals 0.2*e^3.2 within 1e-9; m=0 curve <= identity"):
        a, v = scaling_curve(4.0, 32, 0, 1)[20]
        assert a == 0.2
        assert abs(v - 0.2 * math.exp(3.2)) <= 1e-9
        for a, v in scaling_curve(4.0, 32, 0, 0, samples=1000):
            assert v <= a


def test_07_schedule_fidelity():
    with criterion(7, "default profile table and the three activation examples"):
        p = default_profile()
        assert (p.n_layers, p.n_steps, p.window_steps) == (57, 32, 16)
        assert (p.i2t_instance, p.i2t_background, p.i2t_attribute, p.t2t, p.i2i) == \
            ((6, 34), (20, 24), (25, 57), (20, 57), (11, 49))
        a = activation_at(p, 10, 3)
        assert a.i2t_classes == {I} and not a.regions
        a = activation_at(p, 22, 3)
        assert a.i2t_classes == {I, B} and a.regions == {Region.T2T, Region.I2I}
        assert not activation_at(p, 40, 20)


def _in_sketch_mass(seed: int, tuned: bool) -> float:
    spec = make_prompt_spec(3, [("cube", 0, 1), ("in forest", 1, 3, True)], {0: I, 1: F, 2: B})
    sketch = rect_sketch(8, 8, [(2, 2, 3, 3)])
    cfg = MiniDitConfig(d_c=3, h=8, w=8, n_double=4, n_single=8, n_steps=8, seed=seed)
    profile = builtin_profile("toy-12", n_steps=8)
    res = run(init_model(cfg), spec, assemble(spec, sketch), build_sensitivity(sketch), profile,
              tuning_on=tuned, capture=True)
    inside = sketch.masks[0].ravel()
    return float(np.mean([extract_regions(c.attention, 3, 64).i2t[inside, 0].mean() for c in res.captures]))


def test_08_directional_effect():
    with criterion(8, "tuning raises in-sketch instance I2T mass in >= 19 of 20 seeds"):
        wins = sum(_in_sketch_mass(s, True) > _in_sketch_mass(s, False) for s in range(20))
        assert wins >= 19, f"{wins}/20"


def test_09_exchange_involution_and_locality():
    with criterion(9, "swap twice restores trajectories; a swap touches only class-C rows"):
        model, spec_a, _, _ = _toy(steps=4)
        spec_b = make_prompt_spec(7, [("green cone", 0, 2), ("pink star", 2, 4), ("in a desert", 4, 7, True)],
                                  dict(enumerate(spec_a.token_classes)))
        rows = [i for i, c in enumerate(spec_a.token_classes) if c is I]

        def twice(layer, step, ta, tb):
            return swap_rows(*swap_rows(ta, tb, rows), rows)

        plain = run_paired(model, spec_a, spec_b, capture=True)
        double = run_paired(model, spec_a, spec_b, hook=twice, capture=True)
        for x, y in ((plain.a, double.a), (plain.b, double.b)):
            assert x.final.checksum() == y.final.checksum()
            assert all(p.attention.tobytes() == q.attention.tobytes() for p, q in zip(x.captures, y.captures))

        res = token_exchange(model, spec_a, spec_b, [I], layers=[2, 4], steps=[0, 2], record=True)
        other = [i for i in range(7) if i not in rows]
        for ev in res.events:
            (ta, tb), (ua, ub) = ev.before, ev.after
            np.testing.assert_array_equal(ua[other], ta[other])
            np.testing.assert_array_equal(ub[other], tb[other])
            if ev.layer in (2, 4) and ev.step in (0, 2):
                np.testing.assert_array_equal(ua[rows], tb[rows])
                np.testing.assert_array_equal(ub[rows], ta[rows])
            else:
                np.testing.assert_array_equal(ua, ta)
                np.testing.assert_array_equal(ub, tb)


def test_10_cli_determinism(tmp_path):
    with criterion(10, "every CLI subcommand gives byte-identical output trees on repeat"):
        for name, (first, second) in run_cli_twice(tmp_path).items():
            assert first, f"{name} wrote nothing"
            assert first == second, f"{name} output differs between runs"
