"""Region views, per-token heatmaps, layer-range statistics and scaling curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import as_matrix
from .errors import BadTokenError, DimMismatchError, EmptyRangeError
from .masks import Region
from .mini_dit import CaptureRecord
from .prompt import PromptSpec, TokenClass
from .tuner import beta_at

STAT_RANGES = ((6, 10), (20, 24), (50, 54))


@dataclass(frozen=True, eq=False)
class RegionView:
    """The four blocks of one unified attention map (views, not copies)."""

    t2t: np.ndarray
    t2i: np.ndarray
    i2t: np.ndarray
    i2i: np.ndarray

    @property
    def d_c(self) -> int:
        return self.t2t.shape[0]

    @property
    def hw(self) -> int:
        return self.i2i.shape[0]

    def __getitem__(self, region: Region) -> np.ndarray:
        return getattr(self, region.value)

    def reassemble(self) -> np.ndarray:
        return np.block([[self.t2t, self.t2i], [self.i2t, self.i2i]])


def extract_regions(attn, d_c: int, hw: int) -> RegionView:
    a = as_matrix(attn)
    if a.shape != (d_c + hw, d_c + hw):
        raise DimMismatchError(f"map of shape {a.shape} cannot split into d_c={d_c}, hw={hw}")
    return RegionView(a[:d_c, :d_c], a[:d_c, d_c:], a[d_c:, :d_c], a[d_c:, d_c:])


def region_means(view: RegionView) -> dict[Region, float]:
    """Mean attention score per block, e.g. to show how weak T2I is."""
    return {r: float(view[r].mean()) for r in Region}


def token_heatmap(view: RegionView, token: int, h: int, w: int) -> np.ndarray:
    """I2T column of one text token, reshaped row-major to ``h x w``."""
    if not 0 <= token < view.d_c:
        raise BadTokenError(f"token {token} outside [0, {view.d_c})")
    if h * w != view.hw:
        raise DimMismatchError(f"{h}x{w} grid for hw={view.hw}")
    return view.i2t[:, token].reshape(h, w).copy()


@dataclass(frozen=True)
class LayerRangeStats:
    label: str
    token_class: TokenClass
    mean: float
    max: float
    count: int


def _range_label(rng: tuple[int, int]) -> str:
    return f"{rng[0]}-{rng[1]}"


def layer_range_stats(
    captures: Sequence[CaptureRecord],
    ranges: Iterable[tuple[int, int]],
    spec: PromptSpec,
    steps: Iterable[int] | None = None,
) -> list[LayerRangeStats]:
    """Aggregate I2T mass per token class over inclusive layer ranges.

    For each image query the mass a class receives is the sum of its row over
    that class's token columns. ``mean`` and ``max`` run over all image
    queries of all captures whose layer lies in the range (and whose step is
    in ``steps`` when given). Classes with no tokens are skipped.

    Raises:
        EmptyRangeError: a range matches no capture.
    """
    d_c = spec.d_c
    step_set = None if steps is None else set(steps)
    classes = [c for c in TokenClass if spec.tokens_of(c)]
    out = []
    for rng in ranges:
        lo, hi = rng
        picked = [
            c for c in captures
            if lo <= c.layer <= hi and (step_set is None or c.step in step_set)
        ]
        if not picked:
            raise EmptyRangeError(f"no captures in layers {lo}-{hi}")
        for cls in classes:
            cols = spec.tokens_of(cls)
            masses = np.concatenate([
                extract_regions(c.attention, d_c, c.attention.shape[0] - d_c).i2t[:, cols].sum(axis=1)
                for c in picked
            ])
            # sort first so the float sum does not depend on capture order
            masses = np.sort(masses)
            out.append(LayerRangeStats(_range_label(rng), cls, float(masses.mean()), float(masses.max()), len(picked)))
    return out


def scaling_curve(lam: float, n_steps: int, step: int, m: int, samples: int = 101) -> list[tuple[float, float]]:
    """``a * exp(beta_t * (m - a))`` on an even grid of ``samples`` points in [0, 1]."""
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    if samples < 2:
        raise ValueError("need at least two samples")
    b = beta_at(lam, n_steps, step)
    a = np.linspace(0.0, 1.0, samples)
    values = a * np.exp(b * (m - a))
    return list(zip(a.tolist(), values.tolist()))


def mean_in_out(heatmap: np.ndarray, region: np.ndarray) -> tuple[float, float]:
    """Mean of a heatmap inside and outside a boolean region."""
    region = np.asarray(region, dtype=bool)
    return float(heatmap[region].mean()), float(heatmap[~region].mean())
