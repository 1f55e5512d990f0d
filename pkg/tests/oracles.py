"""Brute-force reference implementations used only by the tests.

Each oracle evaluates the defining membership predicate or formula entry by
entry with plain Python loops, independently of the vectorized code.
"""

import math

import numpy as np

from ast_attn.masks import Region
from ast_attn.prompt import TokenClass
from ast_attn.tuner import beta_at


def t2t_predicate(spec):
    d = spec.d_c
    out = np.zeros((d, d), dtype=np.uint8)
    for i in range(d):
        for j in range(d):
            for sp in spec.sub_prompts:
                if sp.start <= i < sp.end and sp.start <= j < sp.end:
                    out[i, j] = 1
    return out


def _regions(sketch, include_background=True):
    """List of index sets: one per mask, then the background complement."""
    sets = [set(np.flatnonzero(sketch.masks[k].ravel()).tolist()) for k in range(sketch.n)]
    if include_background:
        covered = set().union(*sets) if sets else set()
        sets.append(set(range(sketch.hw)) - covered)
    return sets


def i2i_predicate(sketch, include_background=True):
    hw = sketch.hw
    regions = _regions(sketch, include_background)
    out = np.zeros((hw, hw), dtype=np.uint8)
    for i in range(hw):
        for j in range(hw):
            if any(i in s and j in s for s in regions):
                out[i, j] = 1
    return out


def i2t_predicate(spec, sketch):
    hw, d = sketch.hw, spec.d_c
    masks = _regions(sketch, include_background=False)
    background = set(range(hw)) - (set().union(*masks) if masks else set())
    foreground = [sp for sp in spec.sub_prompts if not sp.is_background]
    pairs = [(masks[k], foreground[k]) for k in range(sketch.n)]
    pairs += [(background, sp) for sp in spec.sub_prompts if sp.is_background]
    out = np.zeros((hw, d), dtype=np.uint8)
    for i in range(hw):
        for j in range(d):
            for pixels, sp in pairs:
                if i in pixels and sp.start <= j < sp.end:
                    out[i, j] = 1
    return out


def sensitivity_explicit(sketch, gamma_text=4.0, gamma_image=1.0):
    hw = sketch.hw
    L = np.zeros((hw, hw))
    for k in range(sketch.n):
        s = sketch.masks[k].ravel().astype(float)[:, None]
        L += s @ s.T
    row = np.array([sum(L[j, i] for i in range(hw)) for j in range(hw)])
    return 1.0 - gamma_text * row / hw, 1.0 - gamma_image * row / hw


def monolithic_tune(attn, mask, g, activation, n_steps, step):
    """Full-matrix evaluation of A * exp(beta * G * (M - A)) then row normalization."""
    n = mask.size
    d = mask.d_c
    M = mask.matrix().astype(float)
    G = np.ones((n, n))
    B = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            text_q, text_k = i < d, j < d
            if text_q and text_k:
                live = Region.T2T in activation.regions
                lam = mask.lambdas[Region.T2T]
            elif not text_q and not text_k:
                live = Region.I2I in activation.regions
                lam = mask.lambdas[Region.I2I]
                G[i, j] = g.g_image[i - d]
            elif not text_q and text_k:
                live = mask.token_classes[j] in activation.i2t_classes
                lam = mask.lambdas[Region.I2T]
                G[i, j] = g.g_text[i - d]
            else:
                live = False
                lam = 0.0
            if live:
                B[i, j] = lam * ((n_steps - step) / n_steps) ** 4
    raw = np.array([[attn[i, j] * math.exp(B[i, j] * G[i, j] * (M[i, j] - attn[i, j]))
                     for j in range(n)] for i in range(n)])
    out = attn.copy()
    for i in range(n):
        if np.any(B[i] != 0):
            out[i] = raw[i] / raw[i].sum()
    return out


def random_instance(rng, max_dc=16, max_side=8):
    """Random (spec, sketch) pair with d_c <= max_dc and hw <= max_side**2."""
    from ast_attn.prompt import make_prompt_spec
    from ast_attn.sketch import to_latent

    d_c = int(rng.integers(1, max_dc + 1))
    # random sorted cut points -> sub-prompt ranges, some tokens left as padding
    subs = []
    pos = 0
    while pos < d_c and len(subs) < 5:
        pos += int(rng.integers(0, 2))
        if pos >= d_c:
            break
        end = int(rng.integers(pos + 1, d_c + 1))
        subs.append([f"sp{len(subs)}", pos, end, False])
        pos = end
    if not subs:
        subs = [["sp0", 0, d_c, False]]
    if len(subs) > 1 and rng.random() < 0.6:
        subs[int(rng.integers(len(subs)))][3] = True
    n_fg = sum(1 for s in subs if not s[3])
    classes = list(TokenClass)
    overrides = {i: classes[int(rng.integers(len(classes)))] for i in range(d_c)}
    spec = make_prompt_spec(d_c, [tuple(s) for s in subs], overrides)

    h, w = int(rng.integers(1, max_side + 1)), int(rng.integers(1, max_side + 1))
    hw = h * w
    n_fg = min(n_fg, hw)
    if n_fg < sum(1 for s in subs if not s[3]):
        # not enough pixels for every instance; shrink the prompt to a single range
        spec = make_prompt_spec(d_c, [("all", 0, d_c, False)], overrides)
        n_fg = 1
    labels = rng.integers(0, n_fg + 1, size=hw)
    # guarantee each instance at least one pixel
    perm = rng.permutation(hw)[:n_fg]
    for k, p in enumerate(perm, 1):
        labels[p] = k
    sketch = to_latent(labels.reshape(h, w), h, w)
    return spec, sketch
