"""Hierarchical step-layer-wise activation tables.

Layers are 1-indexed and ranges are inclusive. Steps are 0-indexed counts of
completed denoising steps, so step ``s`` is live while ``s < window_steps``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import FormatError, ProfileError
from .masks import Region
from .prompt import TokenClass

LayerRange = tuple[int, int]

_RANGE_FIELDS = ("i2t_instance", "i2t_background", "i2t_attribute", "t2t", "i2i")


@dataclass(frozen=True)
class ScheduleProfile:
    n_layers: int
    n_steps: int
    window_steps: int
    i2t_instance: LayerRange
    i2t_background: LayerRange
    i2t_attribute: LayerRange
    t2t: LayerRange
    i2i: LayerRange

    def __post_init__(self):
        if self.n_layers < 1 or self.n_steps < 1:
            raise ProfileError("n_layers and n_steps must be positive")
        if not 0 <= self.window_steps <= self.n_steps:
            raise ProfileError(f"window_steps {self.window_steps} outside [0, {self.n_steps}]")
        for name in _RANGE_FIELDS:
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi <= self.n_layers:
                raise ProfileError(f"{name} range [{lo},{hi}] outside [1,{self.n_layers}]")

    def ranges(self) -> dict[str, LayerRange]:
        return {name: getattr(self, name) for name in _RANGE_FIELDS}


@dataclass(frozen=True)
class Activation:
    """What to tune at one (layer, step): self-attention regions and I2T token classes."""

    regions: frozenset = frozenset()
    i2t_classes: frozenset = frozenset()

    def __bool__(self) -> bool:
        return bool(self.regions or self.i2t_classes)


EMPTY = Activation()


def default_profile() -> ScheduleProfile:
    """The 57-layer, 32-step FLUX-dev table."""
    return ScheduleProfile(
        n_layers=57,
        n_steps=32,
        window_steps=16,
        i2t_instance=(6, 34),
        i2t_background=(20, 24),
        i2t_attribute=(25, 57),
        t2t=(20, 57),
        i2i=(11, 49),
    )


def full_layer_profile(n_layers: int = 57, n_steps: int = 32) -> ScheduleProfile:
    """Every region and class live at every layer and step."""
    full = (1, n_layers)
    return ScheduleProfile(n_layers, n_steps, n_steps, full, full, full, full, full)


def empty_profile(n_layers: int = 57, n_steps: int = 32) -> ScheduleProfile:
    """Same bands as the default but a zero-step window, so nothing is ever live."""
    return replace(scale_profile(default_profile(), n_layers, n_steps), window_steps=0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def scale_profile(profile: ScheduleProfile, n_layers: int, n_steps: int) -> ScheduleProfile:
    """Rescale layer bounds and the step window to a model of another depth.

    Each layer bound ``b`` maps to ``max(1, round(b * n_layers / profile.n_layers))``
    (half-up rounding); the window scales by ``n_steps / profile.n_steps`` with
    floor and a minimum of one step.
    """
    if n_layers < 1 or n_steps < 1:
        raise ProfileError("n_layers and n_steps must be positive")

    def bound(b: int) -> int:
        return min(n_layers, max(1, _round_half_up(b * n_layers / profile.n_layers)))

    scaled = {name: (bound(lo), bound(hi)) for name, (lo, hi) in profile.ranges().items()}
    window = max(1, math.floor(profile.window_steps * n_steps / profile.n_steps))
    if profile.window_steps == 0:
        window = 0
    return ScheduleProfile(n_layers=n_layers, n_steps=n_steps, window_steps=window, **scaled)


def _in(layer: int, rng: LayerRange) -> bool:
    return rng[0] <= layer <= rng[1]


def activation_at(profile: ScheduleProfile, layer: int, step: int) -> Activation:
    """Regions and I2T token classes live at a 1-indexed layer and 0-indexed step."""
    if not 1 <= layer <= profile.n_layers:
        raise ProfileError(f"layer {layer} outside [1, {profile.n_layers}]")
    if not 0 <= step < profile.n_steps:
        raise ProfileError(f"step {step} outside [0, {profile.n_steps})")
    if step >= profile.window_steps:
        return EMPTY
    regions = set()
    if _in(layer, profile.t2t):
        regions.add(Region.T2T)
    if _in(layer, profile.i2i):
        regions.add(Region.I2I)
    classes = set()
    if _in(layer, profile.i2t_instance):
        classes.add(TokenClass.INSTANCE)
    if _in(layer, profile.i2t_background):
        classes.add(TokenClass.BACKGROUND)
    if _in(layer, profile.i2t_attribute):
        classes.add(TokenClass.ATTRIBUTE)
    return Activation(frozenset(regions), frozenset(classes))


def activation_table(profile: ScheduleProfile) -> list[list[Activation]]:
    """``table[layer - 1][step]`` for every layer and step of the profile."""
    return [
        [activation_at(profile, layer, step) for step in range(profile.n_steps)]
        for layer in range(1, profile.n_layers + 1)
    ]


def format_profile(profile: ScheduleProfile) -> str:
    lines = [
        f"n_layers = {profile.n_layers}",
        f"n_steps = {profile.n_steps}",
        f"window_steps = {profile.window_steps}",
    ]
    lines += [f"{name} = {lo} {hi}" for name, (lo, hi) in profile.ranges().items()]
    return "\n".join(lines) + "\n"


def parse_profile(source: str, base: ScheduleProfile | None = None) -> ScheduleProfile:
    """Parse ``key = value`` lines; keys left out are taken from ``base`` (default profile)."""
    values = {f.name: getattr(base or default_profile(), f.name) for f in fields(ScheduleProfile)}
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep or key not in values:
            raise FormatError(f"profile line {lineno}: unknown or malformed entry {line!r}")
        nums = rest.split()
        try:
            if key in _RANGE_FIELDS:
                if len(nums) != 2:
                    raise ValueError
                values[key] = (int(nums[0]), int(nums[1]))
            else:
                if len(nums) != 1:
                    raise ValueError
                values[key] = int(nums[0])
        except ValueError:
            raise FormatError(f"profile line {lineno}: bad value for {key}") from None
    return ScheduleProfile(**values)


def load_profile(path) -> ScheduleProfile:
    return parse_profile(Path(path).read_text())


_TOY = re.compile(r"toy-(\d+)$")


def builtin_profile(name: str, n_layers: int | None = None, n_steps: int | None = None) -> ScheduleProfile:
    """Resolve ``flux-dev-57``, ``full-layer``, ``empty`` or ``toy-N``.

    ``n_layers``/``n_steps`` rescale the result when given (``toy-N`` fixes the
    layer count to ``N``).
    """
    m = _TOY.match(name)
    if name == "flux-dev-57":
        profile = default_profile()
    elif name == "full-layer":
        return full_layer_profile(n_layers or 57, n_steps or 32)
    elif name == "empty":
        return empty_profile(n_layers or 57, n_steps or 32)
    elif m:
        n = int(m.group(1))
        if n < 1:
            raise ProfileError("toy-N needs N >= 1")
        return scale_profile(default_profile(), n, n_steps or 32)
    else:
        raise ProfileError(f"unknown built-in profile {name!r}")
    if n_layers is not None or n_steps is not None:
        profile = scale_profile(profile, n_layers or profile.n_layers, n_steps or profile.n_steps)
    return profile
