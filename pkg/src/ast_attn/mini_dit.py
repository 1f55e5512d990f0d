"""A deterministic toy diffusion transformer.

The model mirrors the FLUX layout at toy scale: ``n_double`` double-stream
blocks (separate text/image projections, joint attention) followed by
``n_single`` single-stream blocks (shared projections). Every block runs one
unified single-head attention over ``d_c + hw`` tokens.

Weights and embeddings are seeded pseudo-random values; there is no training
and no text encoder. The sampler is a fixed-coefficient relaxation
``x <- x + (y - x) / n_steps`` toward the block-stack output ``y``; it only
exists to exercise multi-step scheduling.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import row_softmax
from .errors import LayoutMismatchError, ProfileError
from .masks import FullMask, SensitivityVector
from .prompt import PromptSpec, TokenClass
from .schedule import ScheduleProfile, activation_at
from .tuner import presoftmax_modulate, tune_attention

_RMS_EPS = 1e-6


@dataclass(frozen=True)
class MiniDitConfig:
    d_c: int
    h: int
    w: int
    d_model: int = 16
    n_double: int = 2
    n_single: int = 3
    n_steps: int = 8
    seed: int = 0

    def __post_init__(self):
        if min(self.d_c, self.h, self.w, self.d_model, self.n_steps) < 1:
            raise ValueError("d_c, h, w, d_model and n_steps must be positive")
        if self.n_double < 0 or self.n_single < 0 or self.n_double + self.n_single < 1:
            raise ValueError("need at least one block")

    @property
    def hw(self) -> int:
        return self.h * self.w

    @property
    def n_layers(self) -> int:
        return self.n_double + self.n_single


@dataclass(frozen=True, eq=False)
class Block:
    """One transformer block.

    ``weights`` maps names to ``d_model x d_model`` matrices: ``q, k, v, o``
    for single-stream blocks, and ``q_text, ..., o_image`` for double-stream
    blocks.
    """

    kind: str
    weights: dict

    def _w(self, name: str, stream: str) -> np.ndarray:
        return self.weights[name if self.kind == "single" else f"{name}_{stream}"]

    def project(self, text: np.ndarray, image: np.ndarray, name: str) -> np.ndarray:
        return np.concatenate([text @ self._w(name, "text"), image @ self._w(name, "image")])

    def logits(self, text: np.ndarray, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pre-softmax attention logits and the value rows."""
        t, x = _rms_norm(text), _rms_norm(image)
        q = self.project(t, x, "q")
        k = self.project(t, x, "k")
        v = self.project(t, x, "v")
        return q @ k.T / np.sqrt(q.shape[1]), v

    def attend(self, attn: np.ndarray, v: np.ndarray, text: np.ndarray, image: np.ndarray):
        """Apply an attention map to the values; residual update of both streams."""
        f = attn @ v
        d_c = text.shape[0]
        return (
            text + f[:d_c] @ self._w("o", "text"),
            image + f[d_c:] @ self._w("o", "image"),
        )


def _rms_norm(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + _RMS_EPS)


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _word_key(word: str | None) -> int:
    return 0 if word is None else zlib.crc32(word.lower().encode("utf-8")) + 1


@dataclass(frozen=True, eq=False)
class MiniDit:
    config: MiniDitConfig
    blocks: tuple[Block, ...]
    image_pos: np.ndarray = field(repr=False)

    @property
    def n_layers(self) -> int:
        return len(self.blocks)

    def checksum(self, layer: int | None = None) -> str:
        """SHA-256 over the weights (of one 1-indexed layer, or all)."""
        h = hashlib.sha256()
        chosen = self.blocks if layer is None else (self.blocks[layer - 1],)
        for block in chosen:
            for name in sorted(block.weights):
                h.update(np.ascontiguousarray(block.weights[name]).tobytes())
        return h.hexdigest()

    def map_weights(self, fn: Callable[[np.ndarray], np.ndarray]) -> "MiniDit":
        blocks = tuple(
            Block(b.kind, {n: _frozen(fn(w)) for n, w in b.weights.items()}) for b in self.blocks
        )
        return MiniDit(self.config, blocks, self.image_pos)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def init_model(config: MiniDitConfig) -> MiniDit:
    """Draw all weights from a generator seeded by ``config.seed``."""
    d = config.d_model
    scale = 1.0 / np.sqrt(d)
    blocks = []
    for layer in range(1, config.n_layers + 1):
        rng = _rng(config.seed, 1, layer)
        if layer <= config.n_double:
            names = [f"{n}_{s}" for s in ("text", "image") for n in "qkvo"]
            kind = "double"
        else:
            names = list("qkvo")
            kind = "single"
        weights = {n: _frozen(rng.normal(0.0, scale, (d, d))) for n in names}
        blocks.append(Block(kind, weights))
    image_pos = _frozen(_rng(config.seed, 2).normal(0.0, 1.0, (config.hw, d)))
    return MiniDit(config, tuple(blocks), image_pos)


def embed_prompt(model: MiniDit, spec: PromptSpec) -> np.ndarray:
    """Seeded pseudo-embeddings: a per-word vector plus a per-position vector."""
    if spec.d_c != model.config.d_c:
        raise LayoutMismatchError(f"prompt has d_c={spec.d_c}, model expects {model.config.d_c}")
    d = model.config.d_model
    seed = model.config.seed
    rows = []
    for i, word in enumerate(spec.token_words()):
        rows.append(_rng(seed, 3, _word_key(word)).normal(0.0, 1.0, d) + 0.5 * _rng(seed, 4, i).normal(0.0, 1.0, d))
    return np.array(rows)


def initial_latent(model: MiniDit, noise_seed: int | None = None) -> np.ndarray:
    cfg = model.config
    seed = cfg.seed if noise_seed is None else noise_seed
    return _rng(seed, 5).normal(0.0, 1.0, (cfg.hw, cfg.d_model))


@dataclass
class StreamState:
    text: np.ndarray
    image: np.ndarray
    step: int = 0

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.text).tobytes())
        h.update(np.ascontiguousarray(self.image).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class CaptureRecord:
    """Attention used at one (1-indexed layer, 0-indexed step).

    ``raw`` is the map before tuning; it is the same object as ``attention``
    when nothing was tuned.
    """

    layer: int
    step: int
    attention: np.ndarray
    raw: np.ndarray

    @property
    def tuned(self) -> bool:
        return self.attention is not self.raw


@dataclass
class RunResult:
    final: StreamState
    captures: list[CaptureRecord]


def unified_attention(model: MiniDit, layer: int, state: StreamState) -> tuple[np.ndarray, StreamState]:
    """One untuned block: returns the attention map and the updated streams."""
    block = model.blocks[layer - 1]
    logits, v = block.logits(state.text, state.image)
    attn = row_softmax(logits)
    text, image = block.attend(attn, v, state.text, state.image)
    return attn, StreamState(text, image, state.step)


Capture = bool | Callable[[int, int], bool]
PairHook = Callable[[int, int, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class _Lane:
    text0: np.ndarray
    latent: np.ndarray
    mask: FullMask | None
    g: SensitivityVector | None
    captures: list = field(default_factory=list)


def _wants(capture: Capture, layer: int, step: int) -> bool:
    return capture(layer, step) if callable(capture) else bool(capture)


def _check_profile(model: MiniDit, profile: ScheduleProfile | None) -> None:
    if profile is None:
        return
    if profile.n_layers != model.n_layers:
        raise ProfileError(f"profile has {profile.n_layers} layers, model has {model.n_layers}")
    if profile.n_steps != model.config.n_steps:
        raise ProfileError(f"profile has {profile.n_steps} steps, model has {model.config.n_steps}")


def _simulate(
    model: MiniDit,
    lanes: list[_Lane],
    profile: ScheduleProfile | None,
    tuning_on: bool,
    capture: Capture,
    renorm: str,
    presoftmax: bool,
    carry_text: bool,
    hook: Callable | None,
) -> list[StreamState]:
    n_steps = model.config.n_steps
    delta = 1.0 / n_steps
    text_in = [lane.text0.copy() for lane in lanes]
    for step in range(n_steps):
        texts = [t.copy() for t in text_in]
        images = [lane.latent + model.image_pos for lane in lanes]
        for layer, block in enumerate(model.blocks, 1):
            attn_texts = hook(layer, step, texts) if hook is not None else texts
            act = activation_at(profile, layer, step) if (tuning_on and profile is not None) else None
            for k, lane in enumerate(lanes):
                logits, v = block.logits(attn_texts[k], images[k])
                raw = row_softmax(logits)
                used = raw
                if act and lane.mask is not None:
                    g = lane.g if lane.g is not None else SensitivityVector.ones(lane.mask.hw)
                    if presoftmax:
                        used = row_softmax(presoftmax_modulate(logits, lane.mask, g, act, n_steps, step))
                    else:
                        used = tune_attention(raw, lane.mask, g, act, n_steps, step, renorm=renorm)
                if _wants(capture, layer, step):
                    lane.captures.append(CaptureRecord(layer, step, used, raw))
                texts[k], images[k] = block.attend(used, v, texts[k], images[k])
        for k, lane in enumerate(lanes):
            target = images[k] - model.image_pos
            lane.latent = lane.latent + delta * (target - lane.latent)
            if carry_text:
                text_in[k] = text_in[k] + delta * (texts[k] - text_in[k])
    return [StreamState(t, lane.latent, n_steps) for t, lane in zip(text_in, lanes)]


def run(
    model: MiniDit,
    spec: PromptSpec,
    mask: FullMask | None = None,
    g: SensitivityVector | None = None,
    profile: ScheduleProfile | None = None,
    tuning_on: bool = True,
    capture: Capture = False,
    renorm: str = "row",
    presoftmax: bool = False,
    carry_text: bool = False,
    noise_seed: int | None = None,
    pre_attention_hook: Callable[[int, int, np.ndarray], np.ndarray] | None = None,
) -> RunResult:
    """Run the full step loop for one prompt.

    At every (layer, step) the raw attention is computed; when ``tuning_on``
    and the profile's activation there is non-empty it is tuned with ``mask``
    and ``g`` before being applied. ``capture`` selects which maps to keep.
    ``pre_attention_hook(layer, step, text)`` may replace the text rows fed to
    attention (the residual stream keeps its own rows).
    """
    _check_profile(model, profile)
    if tuning_on and profile is not None and mask is None:
        raise ValueError("tuning needs a mask")
    lane = _Lane(embed_prompt(model, spec), initial_latent(model, noise_seed), mask, g)
    hook = None
    if pre_attention_hook is not None:
        hook = lambda layer, step, texts: [pre_attention_hook(layer, step, texts[0])]  # noqa: E731
    (final,) = _simulate(model, [lane], profile, tuning_on, capture, renorm, presoftmax, carry_text, hook)
    return RunResult(final, lane.captures)


@dataclass
class HookEvent:
    layer: int
    step: int
    before: tuple[np.ndarray, np.ndarray]
    after: tuple[np.ndarray, np.ndarray]


@dataclass
class ExchangeResult:
    a: RunResult
    b: RunResult
    events: list[HookEvent]


def run_paired(
    model: MiniDit,
    spec_a: PromptSpec,
    spec_b: PromptSpec,
    hook: PairHook | None = None,
    mask_a: FullMask | None = None,
    mask_b: FullMask | None = None,
    g_a: SensitivityVector | None = None,
    g_b: SensitivityVector | None = None,
    profile: ScheduleProfile | None = None,
    tuning_on: bool = False,
    capture: Capture = False,
    carry_text: bool = False,
    noise_seed: int | None = None,
    record: bool = False,
) -> ExchangeResult:
    """Run two prompts in lockstep from the same noise.

    ``hook(layer, step, text_a, text_b)`` returns the text rows each stream
    feeds into attention at that hook.
    """
    _check_profile(model, profile)
    latent = initial_latent(model, noise_seed)
    lanes = [
        _Lane(embed_prompt(model, spec_a), latent.copy(), mask_a, g_a),
        _Lane(embed_prompt(model, spec_b), latent.copy(), mask_b, g_b),
    ]
    events: list[HookEvent] = []

    def pair_hook(layer, step, texts):
        if hook is None:
            return texts
        ta, tb = hook(layer, step, texts[0], texts[1])
        if record:
            events.append(HookEvent(layer, step, (texts[0].copy(), texts[1].copy()), (ta.copy(), tb.copy())))
        return [ta, tb]

    fa, fb = _simulate(model, lanes, profile, tuning_on, capture, "row", False, carry_text, pair_hook)
    return ExchangeResult(RunResult(fa, lanes[0].captures), RunResult(fb, lanes[1].captures), events)


def swap_rows(text_a: np.ndarray, text_b: np.ndarray, rows: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Copies of both matrices with ``rows`` exchanged."""
    rows = list(rows)
    ta, tb = text_a.copy(), text_b.copy()
    ta[rows], tb[rows] = text_b[rows], text_a[rows]
    return ta, tb


def token_exchange(
    model: MiniDit,
    spec_a: PromptSpec,
    spec_b: PromptSpec,
    classes: Iterable[TokenClass],
    layers: Iterable[int],
    steps: Iterable[int],
    **kwargs,
) -> ExchangeResult:
    """Swap class-specific text rows between two prompts inside a window.

    At every hook with layer in ``layers`` (1-indexed) and step in ``steps``
    (0-indexed), the attention input rows of tokens whose class is in
    ``classes`` are exchanged between the streams. Outside the window the
    streams run independently.

    Raises:
        LayoutMismatchError: the prompts differ in ``d_c`` or token classes.
    """
    if spec_a.d_c != spec_b.d_c or spec_a.token_classes != spec_b.token_classes:
        raise LayoutMismatchError("exchanged prompts must share d_c and token class layout")
    classes = set(classes)
    rows = [i for i, c in enumerate(spec_a.token_classes) if c in classes]
    layers, steps = set(layers), set(steps)

    def hook(layer, step, ta, tb):
        if rows and layer in layers and step in steps:
            return swap_rows(ta, tb, rows)
        return ta, tb

    return run_paired(model, spec_a, spec_b, hook=hook, **kwargs)
