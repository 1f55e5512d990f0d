"""Attention specialty tuning on post-softmax attention maps.

For every live region the map is rescaled elementwise as

    A * exp(beta_t * G * (M - A))

and each touched row is renormalized over the full (text + image) key axis.
Entries with ``M = 1`` are amplified and entries with ``M = 0`` suppressed,
more strongly early in sampling since ``beta_t`` decays with the step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_matrix, hadamard_exp, row_normalize, ZERO_ROW_EPS
from .errors import ShapeMismatchError, ZeroRowError
from .masks import FullMask, Region, SensitivityVector
from .schedule import Activation


@dataclass(frozen=True)
class TuneParams:
    """Step bookkeeping: ``step`` counts completed steps out of ``n_steps``."""

    lam: float
    n_steps: int
    step: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 <= self.step < self.n_steps:
            raise ValueError(f"step {self.step} outside [0, {self.n_steps})")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


def beta(params: TuneParams) -> float:
    """``lam * (t / T)**4`` with ``t = T - step`` the remaining steps."""
    t = params.n_steps - params.step
    return params.lam * (t / params.n_steps) ** 4


def beta_at(lam: float, n_steps: int, step: int) -> float:
    return beta(TuneParams(lam, n_steps, step))


def tune_region(a, m, g, beta_value: float) -> np.ndarray:
    """Un-normalized ``a * exp(beta * g * (m - a))`` for one block.

    ``g`` is broadcast per row (one value per query). The caller renormalizes
    the full attention rows afterwards.
    """
    a = as_matrix(a)
    m = as_matrix(m)
    if a.shape != m.shape:
        raise ShapeMismatchError(f"attention {a.shape} vs mask {m.shape}")
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 0:
        g = np.full(a.shape[0], float(g))
    elif g.shape != (a.shape[0],):
        raise ShapeMismatchError("g must be a scalar or one value per row")
    return hadamard_exp(a, beta_value * g[:, None] * (m - a))


def _live_blocks(mask: FullMask, g: SensitivityVector, activation: Activation, n_steps: int, step: int):
    """Yield ``(rows, cols, block_mask, g_rows, beta, col_gate)`` per live region."""
    d = mask.d_c
    text = slice(0, d)
    image = slice(d, d + mask.hw)
    if Region.T2T in activation.regions:
        b = beta_at(mask.lambdas[Region.T2T], n_steps, step)
        yield text, text, mask.t2t.data, np.ones(d), b, None
    if Region.I2I in activation.regions:
        b = beta_at(mask.lambdas[Region.I2I], n_steps, step)
        yield image, image, mask.i2i.data, g.g_image, b, None
    if activation.i2t_classes:
        gate = np.array([c in activation.i2t_classes for c in mask.token_classes])
        if gate.any():
            b = beta_at(mask.lambdas[Region.I2T], n_steps, step)
            yield image, text, mask.i2t.data, g.g_text, b, gate


def tuning_multiplier(attn, mask: FullMask, g: SensitivityVector, activation: Activation,
                      n_steps: int, step: int) -> np.ndarray:
    """Elementwise factor ``exp(beta * G * (M - A))`` over the whole map; 1 where not live."""
    a = as_matrix(attn)
    mult = np.ones_like(a)
    for rows, cols, m, g_rows, b, gate in _live_blocks(mask, g, activation, n_steps, step):
        block = a[rows, cols]
        factor = np.exp(b * g_rows[:, None] * (m - block))
        if gate is not None:
            factor = np.where(gate[None, :], factor, 1.0)
        mult[rows, cols] = factor
    return mult


def tune_attention(
    attn,
    mask: FullMask,
    g: SensitivityVector,
    activation: Activation,
    n_steps: int,
    step: int,
    renorm: str = "row",
) -> np.ndarray:
    """Tune a row-stochastic ``(d_c+hw)^2`` attention map for one (layer, step).

    Rows no live region touches are copied unchanged; with an empty
    activation the input array itself is returned. ``renorm="row"``
    normalizes touched rows over all keys; ``renorm="region"`` instead
    rescales each tuned block segment back to its original mass, which
    leaves untuned blocks (T2I in particular) bit-exact.

    Raises:
        ZeroRowError: a touched row loses all of its mass.
    """
    a = as_matrix(attn)
    if a.shape != (mask.size, mask.size):
        raise ShapeMismatchError(f"attention {a.shape} does not match mask size {mask.size}")
    if renorm not in ("row", "region"):
        raise ValueError(f"renorm must be 'row' or 'region', got {renorm!r}")
    blocks = list(_live_blocks(mask, g, activation, n_steps, step))
    if not blocks:
        return a

    out = a.copy()
    touched = np.zeros(mask.size, dtype=bool)
    for rows, cols, m, g_rows, b, gate in blocks:
        block = a[rows, cols]
        tuned = tune_region(block, m, g_rows, b)
        if gate is not None:
            tuned = np.where(gate[None, :], tuned, block)
        if renorm == "region":
            before = block.sum(axis=1, keepdims=True)
            after = tuned.sum(axis=1, keepdims=True)
            bad = (after < ZERO_ROW_EPS) & (before > 0)
            if bad.any():
                raise ZeroRowError("a tuned region segment lost all of its mass")
            tuned = tuned * np.divide(before, after, out=np.zeros_like(before), where=after > 0)
        out[rows, cols] = tuned
        touched[rows] = True
    if renorm == "row":
        out[touched] = row_normalize(out[touched])
    return out


def presoftmax_modulate(logits, mask: FullMask, g: SensitivityVector, activation: Activation,
                        n_steps: int, step: int) -> np.ndarray:
    """Comparison baseline: add ``beta * G * M`` to the logits before softmax.

    This is the additive pre-softmax modulation used by earlier layout
    methods, kept only to contrast with post-softmax tuning.
    """
    x = as_matrix(logits).copy()
    for rows, cols, m, g_rows, b, gate in _live_blocks(mask, g, activation, n_steps, step):
        bump = b * g_rows[:, None] * m
        if gate is not None:
            bump = np.where(gate[None, :], bump, 0.0)
        x[rows, cols] += bump
    return x
