"""Instance sketch layouts at latent resolution.

A sketch file is an integer grid of instance ids (0 = unassigned). It is
pooled down to the latent ``h x w`` grid with majority voting and stored as
one boolean mask per instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadIndexError,
    DimError,
    EmptyMaskError,
    FormatError,
    NonContiguousIdsError,
)
from .io import parse_pgm


@dataclass(frozen=True, eq=False)
class SketchSet:
    """Binary instance masks on an ``h x w`` latent grid.

    Attributes:
        masks: boolean array of shape ``(N, h, w)``; ``masks[k]`` is instance
            ``k + 1`` of the source grid.
        binding: sub-prompt index for each mask, or ``None`` to bind masks to
            the non-background sub-prompts in order (see
            :func:`ast_attn.masks.resolve_binding`).
    """

    h: int
    w: int
    masks: np.ndarray
    binding: tuple[int, ...] | None = None

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=bool)
        if masks.ndim == 2:
            masks = masks[None]
        if masks.size == 0:
            masks = np.zeros((0, self.h, self.w), dtype=bool)
        if masks.shape[1:] != (self.h, self.w):
            raise DimError(f"masks of shape {masks.shape[1:]} on a {self.h}x{self.w} grid")
        for k, m in enumerate(masks):
            if not m.any():
                raise EmptyMaskError(f"mask {k} has no set pixel")
        if self.binding is not None:
            if len(self.binding) != len(masks):
                raise FormatError("binding length must equal the number of masks")
            if len(set(self.binding)) != len(self.binding):
                raise FormatError("binding must be injective")
        masks.setflags(write=False)
        object.__setattr__(self, "masks", masks)

    @property
    def n(self) -> int:
        return self.masks.shape[0]

    @property
    def hw(self) -> int:
        return self.h * self.w

    def flat_masks(self) -> np.ndarray:
        """``(N, hw)`` boolean matrix of row-major flattened masks."""
        return self.masks.reshape(self.n, self.hw)

    def union(self) -> np.ndarray:
        return self.flat_masks().any(axis=0)

    def background(self) -> np.ndarray:
        """Row-major indices not covered by any instance mask."""
        return np.flatnonzero(~self.union())

    def with_binding(self, binding) -> "SketchSet":
        return SketchSet(self.h, self.w, self.masks, tuple(int(b) for b in binding))


def _check_ids(grid: np.ndarray) -> np.ndarray:
    if grid.ndim != 2 or grid.size == 0:
        raise FormatError("sketch must be a non-empty 2-D grid")
    if grid.min() < 0:
        raise FormatError("instance ids must be non-negative")
    ids = np.unique(grid)
    ids = ids[ids > 0]
    if ids.size and not np.array_equal(ids, np.arange(1, ids.size + 1)):
        missing = sorted(set(range(1, int(ids.max()) + 1)) - set(ids.tolist()))
        raise NonContiguousIdsError(f"instance ids skip {missing}")
    return grid


def parse_text_grid(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise FormatError("empty grid")
    if len({len(r) for r in rows}) != 1:
        raise FormatError("ragged grid rows")
    try:
        return np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
    except ValueError:
        raise FormatError("grid entries must be integers") from None


def load_sketch(path) -> np.ndarray:
    """Load an instance-id grid from a PGM (P2/P5) or whitespace text grid.

    Raises:
        FormatError: unreadable file.
        NonContiguousIdsError: ids do not run 1..K without gaps.
    """
    data = Path(path).read_bytes()
    if data[:2] in (b"P2", b"P5"):
        grid = parse_pgm(data)
    else:
        try:
            grid = parse_text_grid(data.decode("ascii"))
        except UnicodeDecodeError:
            raise FormatError("sketch is neither PGM nor a text grid") from None
    return _check_ids(grid)


def to_latent(grid, h: int, w: int, threshold: float = 0.5, binding=None) -> SketchSet:
    """Majority-pool an instance-id grid onto an ``h x w`` latent grid.

    A latent cell takes id ``k`` when at least ``threshold`` of its source
    pixels carry ``k``; if several ids qualify the largest share wins and
    ties go to the lower id.

    Raises:
        DimError: grid sides are not integer multiples of ``h`` and ``w``.
    """
    g = _check_ids(np.asarray(grid, dtype=np.int64))
    H, W = g.shape
    if h < 1 or w < 1 or H % h or W % w:
        raise DimError(f"{H}x{W} grid is not a multiple of latent {h}x{w}")
    n_ids = int(g.max())
    bh, bw = H // h, W // w
    blocks = g.reshape(h, bh, w, bw).transpose(0, 2, 1, 3).reshape(h, w, bh * bw)
    shares = np.stack([(blocks == k).mean(axis=-1) for k in range(1, n_ids + 1)]) if n_ids else np.zeros((0, h, w))
    masks = np.zeros((n_ids, h, w), dtype=bool)
    if n_ids:
        eligible = np.where(shares >= threshold, shares, -1.0)
        # argmax returns the first maximum, i.e. the lowest id on ties
        best = eligible.argmax(axis=0)
        assigned = eligible.max(axis=0) >= 0
        for k in range(n_ids):
            masks[k] = assigned & (best == k)
    return SketchSet(h, w, masks, binding)


def parse_latent(text: str) -> tuple[int, int]:
    """Parse ``"HxW"`` into ``(h, w)``."""
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise FormatError(f"latent size must look like 8x8, got {text!r}") from None
    if h < 1 or w < 1:
        raise FormatError("latent sides must be positive")
    return h, w


def flatten(sketch: SketchSet, k: int) -> np.ndarray:
    """Row-major indices of the set pixels of mask ``k``."""
    if not 0 <= k < sketch.n:
        raise BadIndexError(f"mask {k} requested from a set of {sketch.n}")
    return np.flatnonzero(sketch.masks[k].ravel())


def rect_sketch(h: int, w: int, rects) -> SketchSet:
    """Build a sketch from ``(top, left, height, width)`` rectangles (later wins)."""
    grid = np.zeros((h, w), dtype=np.int64)
    for k, (top, left, rh, rw) in enumerate(rects, 1):
        grid[top : top + rh, left : left + rw] = k
    return to_latent(grid, h, w)
