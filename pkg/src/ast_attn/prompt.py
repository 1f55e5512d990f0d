"""Annotated prompt specifications: sub-prompts, token ranges, token classes.

Tokenization is not performed here. A prompt file declares the token count
``d_c`` and the ``[start, end)`` token range of every sub-prompt directly::

    # "Red cube in a forest"
    d_c = 7
    sub = "Red cube" 0 3
    sub = "in a forest" 3 7 background
    tok 6 filler

Words of a sub-prompt label are aligned to tokens left to right: word ``k``
of the label sits on token ``start + k``. Tokens past the last word (e.g.
sub-word pieces or an end marker) carry no word. ``tok <index> <class>``
lines pin a token's class and win over any lexicon lookup.
"""

from __future__ import annotations

import enum
import shlex
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .errors import (
    EmptySubPromptError,
    FormatError,
    OverlapError,
    RangeError,
    UnknownWordError,
)


class TokenClass(enum.Enum):
    ATTRIBUTE = "attribute"
    INSTANCE = "instance"
    BACKGROUND = "background"
    FILLER = "filler"

    @classmethod
    def parse(cls, text: str) -> "TokenClass":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise FormatError(f"unknown token class {text!r}") from None


@dataclass(frozen=True)
class SubPrompt:
    label: str
    start: int
    end: int
    is_background: bool = False

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.label.split())

    def __contains__(self, token: int) -> bool:
        return self.start <= token < self.end

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PromptSpec:
    d_c: int
    sub_prompts: tuple[SubPrompt, ...]
    token_classes: tuple[TokenClass, ...]
    overrides: Mapping[int, TokenClass] = field(default_factory=dict)

    def __post_init__(self):
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.sub_prompts)

    def sub_prompt_of(self, token: int) -> int | None:
        """Index of the sub-prompt that owns ``token``, or ``None`` for padding."""
        for k, sp in enumerate(self.sub_prompts):
            if token in sp:
                return k
        return None

    def token_words(self) -> tuple[str | None, ...]:
        """Surface word aligned to each token (``None`` where there is none)."""
        words: list[str | None] = [None] * self.d_c
        for sp in self.sub_prompts:
            for k, word in enumerate(sp.words[: len(sp)]):
                words[sp.start + k] = word
        return tuple(words)

    def tokens_of(self, cls: TokenClass) -> list[int]:
        return [i for i, c in enumerate(self.token_classes) if c is cls]

    def class_counts(self) -> dict[TokenClass, int]:
        return {c: len(self.tokens_of(c)) for c in TokenClass}


def _validate(spec: PromptSpec) -> None:
    if spec.d_c < 1:
        raise RangeError(f"d_c must be positive, got {spec.d_c}")
    if len(spec.token_classes) != spec.d_c:
        raise RangeError(
            f"{len(spec.token_classes)} token classes for d_c={spec.d_c}"
        )
    prev_end = 0
    ordered = sorted(spec.sub_prompts, key=lambda sp: (sp.start, sp.end))
    for sp in spec.sub_prompts:
        if sp.end <= sp.start:
            raise EmptySubPromptError(f"sub-prompt {sp.label!r} has range [{sp.start},{sp.end})")
        if sp.start < 0 or sp.end > spec.d_c:
            raise RangeError(
                f"sub-prompt {sp.label!r} range [{sp.start},{sp.end}) outside [0,{spec.d_c})"
            )
    for sp in ordered:
        if sp.start < prev_end:
            raise OverlapError(f"sub-prompt {sp.label!r} overlaps a previous range")
        prev_end = sp.end
    if tuple(ordered) != spec.sub_prompts:
        raise OverlapError("sub-prompt ranges must be listed in token order")
    for idx in spec.overrides:
        if not 0 <= idx < spec.d_c:
            raise RangeError(f"token override {idx} outside [0,{spec.d_c})")


def make_prompt_spec(
    d_c: int,
    sub_prompts,
    overrides: Mapping[int, TokenClass] | None = None,
) -> PromptSpec:
    """Build a validated spec from ``(label, start, end[, background])`` tuples.

    Tokens without an explicit override start out as ``FILLER``; run
    :func:`classify_tokens` to fill them in from a lexicon.
    """
    subs = tuple(sp if isinstance(sp, SubPrompt) else SubPrompt(*sp) for sp in sub_prompts)
    overrides = dict(overrides or {})
    classes = tuple(overrides.get(i, TokenClass.FILLER) for i in range(d_c))
    return PromptSpec(d_c=d_c, sub_prompts=subs, token_classes=classes, overrides=overrides)


def parse_prompt_spec(source: str) -> PromptSpec:
    """Parse the line-oriented prompt format described in the module docstring."""
    d_c = None
    subs = []
    overrides: dict[int, TokenClass] = {}
    for lineno, raw in enumerate(source.splitlines(), 1):
        try:
            parts = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if not parts:
            continue
        try:
            if parts[0] == "d_c":
                d_c = int(_after_eq(parts)[0])
            elif parts[0] == "sub":
                args = _after_eq(parts)
                if len(args) not in (3, 4) or (len(args) == 4 and args[3] != "background"):
                    raise FormatError("expected: sub = \"<label>\" <start> <end> [background]")
                subs.append(SubPrompt(args[0], int(args[1]), int(args[2]), len(args) == 4))
            elif parts[0] == "tok":
                if len(parts) != 3:
                    raise FormatError("expected: tok <index> <class>")
                overrides[int(parts[1])] = TokenClass.parse(parts[2])
            else:
                raise FormatError(f"unknown key {parts[0]!r}")
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    if d_c is None:
        raise FormatError("missing d_c")
    return make_prompt_spec(d_c, subs, overrides)


def _after_eq(parts: list[str]) -> list[str]:
    rest = parts[1:]
    if rest and rest[0] == "=":
        rest = rest[1:]
    elif rest and rest[0].startswith("="):
        rest = [rest[0][1:]] + rest[1:]
    if not rest:
        raise FormatError(f"{parts[0]} needs a value")
    return rest


def load_prompt_spec(path) -> PromptSpec:
    return parse_prompt_spec(Path(path).read_text())


def parse_lexicon(source: str) -> dict[str, TokenClass]:
    """Parse ``<word> <class>`` lines into a lowercase lexicon."""
    lexicon = {}
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"lexicon line {lineno}: expected '<word> <class>'")
        lexicon[parts[0].lower()] = TokenClass.parse(parts[1])
    return lexicon


def load_lexicon(path) -> dict[str, TokenClass]:
    return parse_lexicon(Path(path).read_text())


def classify_tokens(
    spec: PromptSpec,
    lexicon: Mapping[str, TokenClass],
    strict: bool = False,
) -> PromptSpec:
    """Assign a class to every token from a word lexicon.

    Resolution order per token: explicit ``tok`` override, then the lexicon
    entry for the aligned word (case-insensitive), then ``BACKGROUND`` inside a
    background sub-prompt, else ``FILLER``.

    Raises:
        UnknownWordError: in strict mode, for a word of a non-background
            sub-prompt that is neither in the lexicon nor overridden.
    """
    lex = {w.lower(): c for w, c in lexicon.items()}
    words = spec.token_words()
    classes = []
    for i in range(spec.d_c):
        if i in spec.overrides:
            classes.append(spec.overrides[i])
            continue
        k = spec.sub_prompt_of(i)
        word = words[i]
        in_background = k is not None and spec.sub_prompts[k].is_background
        if word is not None and word.lower() in lex:
            classes.append(lex[word.lower()])
        elif in_background:
            classes.append(TokenClass.BACKGROUND)
        else:
            if strict and word is not None:
                raise UnknownWordError(word)
            classes.append(TokenClass.FILLER)
    return replace(spec, token_classes=tuple(classes))
