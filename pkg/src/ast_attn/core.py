"""Dense row-wise kernels shared by every other module.

Matrices are plain 2-D ``float64`` numpy arrays. All reductions run along the
last axis, i.e. one attention row (one query) at a time.
"""

import numpy as np

from .errors import ShapeMismatchError, ZeroRowError

#: Row sums below this are treated as a fully suppressed (degenerate) row.
ZERO_ROW_EPS = 1e-300


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-D float64 array (no copy when already one)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def row_softmax(logits) -> np.ndarray:
    """Softmax along each row, with max-subtraction for overflow safety.

    Example:
        >>> row_softmax([[0.0, np.log(3.0)]])
        array([[0.25, 0.75]])
    """
    x = as_matrix(logits)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def row_normalize(weights) -> np.ndarray:
    """Scale each row of a non-negative matrix so that it sums to one.

    Raises:
        ZeroRowError: if any row sums to less than ``ZERO_ROW_EPS``.
    """
    w = as_matrix(weights)
    sums = w.sum(axis=-1, keepdims=True)
    bad = np.flatnonzero(sums[:, 0] < ZERO_ROW_EPS)
    if bad.size:
        raise ZeroRowError(f"row {int(bad[0])} sums to {float(sums[bad[0], 0])!r}")
    return w / sums


def hadamard_exp(base, exponent) -> np.ndarray:
    """Elementwise ``base * exp(exponent)``."""
    b = as_matrix(base)
    e = as_matrix(exponent)
    if b.shape != e.shape:
        raise ShapeMismatchError(f"shapes {b.shape} and {e.shape} differ")
    return b * np.exp(e)


def is_row_stochastic(m, atol: float = 1e-9) -> bool:
    m = as_matrix(m)
    return bool(np.all(m >= 0) and np.all(np.abs(m.sum(axis=-1) - 1.0) <= atol))
