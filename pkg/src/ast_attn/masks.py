"""Region masks, the sensitivity vector and the assembled tuning mask.

The unified attention map over ``d_c`` text tokens followed by ``hw`` image
tokens splits into four blocks (rows are queries, columns are keys)::

          text      image
    text  T2T       T2I
    image I2T       I2I

T2T, I2I and I2T each get a binary mask saying which entries to amplify.
T2I is never tuned and has no mask.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BindingError, ShapeMismatchError
from .prompt import PromptSpec, TokenClass
from .sketch import SketchSet

DEFAULT_LAMBDA_CROSS = 5.0
DEFAULT_LAMBDA_SELF = 3.5
DEFAULT_GAMMA_TEXT = 4.0
DEFAULT_GAMMA_IMAGE = 1.0


class Region(enum.Enum):
    T2T = "t2t"
    T2I = "t2i"
    I2T = "i2t"
    I2I = "i2i"


@dataclass(frozen=True, eq=False)
class RegionMask:
    region: Region
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 2:
            raise ShapeMismatchError("region masks are 2-D")
        if np.any(data > 1):
            raise ValueError("region masks are binary")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class SensitivityVector:
    """Per-image-query sensitivity for text-key (I2T) and image-key (I2I) tuning."""

    g_text: np.ndarray
    g_image: np.ndarray

    def __post_init__(self):
        for name in ("g_text", "g_image"):
            v = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.g_text.shape != self.g_image.shape:
            raise ShapeMismatchError("g_text and g_image must have equal length")

    @classmethod
    def ones(cls, hw: int) -> "SensitivityVector":
        return cls(np.ones(hw), np.ones(hw))


@dataclass(frozen=True, eq=False)
class FullMask:
    """The three tuned region masks plus the lambda for each.

    ``token_classes`` travels with the mask so the tuner can gate I2T columns
    per token class.
    """

    d_c: int
    hw: int
    t2t: RegionMask
    i2i: RegionMask
    i2t: RegionMask
    lambdas: Mapping[Region, float]
    token_classes: tuple[TokenClass, ...]

    def __post_init__(self):
        expected = {
            "t2t": (self.d_c, self.d_c),
            "i2i": (self.hw, self.hw),
            "i2t": (self.hw, self.d_c),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeMismatchError(f"{name} mask has shape {getattr(self, name).shape}, expected {shape}")
        if len(self.token_classes) != self.d_c:
            raise ShapeMismatchError("one token class per text token required")
        if Region.T2I in self.lambdas:
            raise ValueError("T2I is never tuned")

    @property
    def size(self) -> int:
        return self.d_c + self.hw

    def matrix(self) -> np.ndarray:
        """The full ``(d_c+hw)^2`` binary mask; the T2I block is zero."""
        d = self.d_c
        out = np.zeros((self.size, self.size), dtype=np.uint8)
        out[:d, :d] = self.t2t.data
        out[d:, :d] = self.i2t.data
        out[d:, d:] = self.i2i.data
        return out


def build_t2t(spec: PromptSpec) -> RegionMask:
    """Ones where both tokens fall in the same sub-prompt; padding stays zero."""
    owner = np.full(spec.d_c, -1)
    for k, sp in enumerate(spec.sub_prompts):
        owner[sp.start : sp.end] = k
    data = (owner[:, None] == owner[None, :]) & (owner[:, None] >= 0)
    return RegionMask(Region.T2T, data)


def _image_labels(sketch: SketchSet, include_background: bool) -> np.ndarray:
    """Region label per image token: mask index, N for background, -1 for none."""
    labels = np.full(sketch.hw, -1)
    for k, m in enumerate(sketch.flat_masks()):
        labels[m] = k
    if include_background:
        labels[labels < 0] = sketch.n
    return labels


def build_i2i(sketch: SketchSet, include_background: bool = True) -> RegionMask:
    """Ones where both image tokens share a sketch region.

    With ``include_background`` the complement of all instance masks counts as
    one more region.
    """
    labels = _image_labels(sketch, include_background)
    data = (labels[:, None] == labels[None, :]) & (labels[:, None] >= 0)
    return RegionMask(Region.I2I, data)


def resolve_binding(spec: PromptSpec, sketch: SketchSet) -> tuple[int, ...]:
    """Sub-prompt index for every mask.

    An explicit binding on the sketch is validated; otherwise masks bind to
    the non-background sub-prompts in token order.

    Raises:
        BindingError: a non-background sub-prompt is left without a mask, a
            mask is left without a sub-prompt, or a mask binds to the
            background sub-prompt.
    """
    foreground = [k for k, sp in enumerate(spec.sub_prompts) if not sp.is_background]
    if sketch.binding is None:
        if len(foreground) != sketch.n:
            raise BindingError(
                f"{sketch.n} sketch masks for {len(foreground)} non-background sub-prompts"
            )
        return tuple(foreground)
    binding = tuple(sketch.binding)
    for b in binding:
        if not 0 <= b < spec.n:
            raise BindingError(f"mask bound to missing sub-prompt {b}")
        if spec.sub_prompts[b].is_background:
            raise BindingError(f"mask bound to background sub-prompt {b}")
    unbound = sorted(set(foreground) - set(binding))
    if unbound:
        raise BindingError(f"sub-prompts {unbound} have neither a mask nor a background flag")
    return binding


def build_i2t(spec: PromptSpec, sketch: SketchSet) -> RegionMask:
    """Ones where an image token lies in ``S_k`` and a text token in ``c_k``.

    Background sub-prompts pair with the complement of all instance masks.
    """
    binding = resolve_binding(spec, sketch)
    data = np.zeros((sketch.hw, spec.d_c), dtype=bool)
    flat = sketch.flat_masks()
    for k, sp_idx in enumerate(binding):
        sp = spec.sub_prompts[sp_idx]
        data[flat[k], sp.start : sp.end] = True
    background = ~sketch.union()
    for sp in spec.sub_prompts:
        if sp.is_background:
            data[background, sp.start : sp.end] = True
    return RegionMask(Region.I2T, data)


def build_sensitivity(
    sketch: SketchSet,
    gamma_text: float = DEFAULT_GAMMA_TEXT,
    gamma_image: float = DEFAULT_GAMMA_IMAGE,
    clamp: bool = False,
) -> SensitivityVector:
    """Area-based sensitivity ``G = 1 - gamma * rowsum(L) / hw``.

    ``L`` is the sum of outer products of the flattened instance masks, so
    its row sum at pixel ``j`` is the total area of the masks containing
    ``j``; it is computed that way instead of materialising ``hw x hw``.
    Values are left unclamped unless ``clamp`` is set.
    """
    flat = sketch.flat_masks().astype(np.float64)
    row_sums = flat.T @ flat.sum(axis=1) if sketch.n else np.zeros(sketch.hw)
    frac = row_sums / sketch.hw
    g_text = 1.0 - gamma_text * frac
    g_image = 1.0 - gamma_image * frac
    if clamp:
        g_text = np.clip(g_text, 0.0, 1.0)
        g_image = np.clip(g_image, 0.0, 1.0)
    return SensitivityVector(g_text, g_image)


def assemble(
    spec: PromptSpec,
    sketch: SketchSet,
    lambda_cross: float = DEFAULT_LAMBDA_CROSS,
    lambda_self: float = DEFAULT_LAMBDA_SELF,
    include_background: bool = True,
) -> FullMask:
    """Build all three region masks; I2T takes ``lambda_cross``, T2T/I2I ``lambda_self``."""
    if lambda_cross < 0 or lambda_self < 0:
        raise ValueError("lambdas must be non-negative")
    return FullMask(
        d_c=spec.d_c,
        hw=sketch.hw,
        t2t=build_t2t(spec),
        i2i=build_i2i(sketch, include_background),
        i2t=build_i2t(spec, sketch),
        lambdas={
            Region.I2T: float(lambda_cross),
            Region.T2T: float(lambda_self),
            Region.I2I: float(lambda_self),
        },
        token_classes=spec.token_classes,
    )
