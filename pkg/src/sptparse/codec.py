"""Conversion between dependency trees and prompt-templated token sequences.

Each word becomes one template unit: an optional absolute-index prompt, a
head-index prompt (or its mask ``[HEAD]``), a relation-label prompt (or
``[DEP]``), an optional POS prompt, and the surface word. A sentence is the
units in order; the flat text form joins a unit's tokens without spaces and
units with single spaces:

    [1][2][nsubj]He [2][0][root]loves [3][4][poss]his [4][2][dobj]rabbits
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .treebank import Sentence, Token
from .vocab import DEP_MASK, HEAD_MASK, PromptVocab, TemplateConfig


class CodecError(ValueError):
    """A sentence that cannot be templated, or a template misuse."""


class DecodeError(CodecError):
    """Token material that does not follow the template scaffold."""


def _bare(prompt: str) -> str:
    return prompt[1:-1]


def _index_value(prompt: str) -> int | None:
    """The k of an ``[k]`` prompt, or None if the lexeme is not an index."""
    if prompt.startswith("[") and prompt.endswith("]"):
        inner = prompt[1:-1]
        if inner.isdigit():
            return int(inner)
    return None


@dataclass(frozen=True)
class TemplateUnit:
    """One word's template: (abs?, refx, label, pos?, word).

    refx holds an index prompt like "[2]" or the mask "[HEAD]"; label holds
    a label prompt like "[nsubj]" or the mask "[DEP]". The two are masked or
    concrete together.
    """

    abs: str | None
    refx: str
    label: str
    pos: str | None
    word: str

    def __post_init__(self) -> None:
        if (self.refx == HEAD_MASK) != (self.label == DEP_MASK):
            raise CodecError(
                f"unit for {self.word!r} mixes masked and concrete slots "
                f"({self.refx!r}, {self.label!r})"
            )
        if not self.word:
            raise CodecError("unit word must be non-empty")

    @property
    def is_masked(self) -> bool:
        return self.refx == HEAD_MASK

    def tokens(self) -> list[str]:
        out = []
        if self.abs is not None:
            out.append(self.abs)
        out.append(self.refx)
        out.append(self.label)
        if self.pos is not None:
            out.append(self.pos)
        out.append(self.word)
        return out


@dataclass(frozen=True)
class PromptedSentence:
    """A sentence's template units in word order, all-masked or all-concrete."""

    units: tuple[TemplateUnit, ...]
    masked: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(self.units))
        for k, unit in enumerate(self.units):
            if unit.is_masked != self.masked:
                raise CodecError(f"unit {k + 1} masked state disagrees with sentence flag")
            if (unit.abs is None) != (self.units[0].abs is None):
                raise CodecError("units disagree on absolute-index prompt presence")
            if (unit.pos is None) != (self.units[0].pos is None):
                raise CodecError("units disagree on POS prompt presence")
            if unit.abs is not None and unit.abs != f"[{k + 1}]":
                raise CodecError(
                    f"unit {k + 1} carries absolute prompt {unit.abs!r}, expected [{k + 1}]"
                )

    @property
    def n(self) -> int:
        return len(self.units)

    def __len__(self) -> int:
        return len(self.units)


@dataclass(frozen=True)
class ParseResult:
    """Per-word predicted heads and labels, plus raw-slot legality flags."""

    heads: tuple[int, ...]
    labels: tuple[str, ...]
    slot_valid: tuple[bool, ...]

    def __post_init__(self) -> None:
        if not len(self.heads) == len(self.labels) == len(self.slot_valid):
            raise CodecError("heads, labels and slot_valid must have equal length")

    @property
    def n(self) -> int:
        return len(self.heads)


@dataclass(frozen=True)
class RepairPolicy:
    """What to do with slots whose raw content is not a legal prediction.

    Both modes substitute head 0 and the fallback label so results stay
    total; "strict" additionally tells the scorer (via slot_valid) to count
    the token as wrong even if the substitute happens to match gold.
    """

    mode: str = "to_root"
    fallback_label: str = "root"

    def __post_init__(self) -> None:
        if self.mode not in ("to_root", "strict"):
            raise CodecError(f"repair mode must be 'to_root' or 'strict', got {self.mode!r}")


def unit_width(config: TemplateConfig) -> int:
    """Tokens per template unit under this configuration."""
    return 3 + int(config.use_abs) + int(config.use_pos)


def _check_length(n: int, vocab: PromptVocab, config: TemplateConfig) -> None:
    if n == 0:
        raise CodecError("cannot template an empty sentence")
    limit = min(config.max_index, vocab.max_index)
    if n > limit:
        raise CodecError(f"sentence has {n} words, exceeding the index-prompt limit {limit}")


def _unit_fields(
    tok: Token, position: int, vocab: PromptVocab, config: TemplateConfig
) -> tuple[str | None, str | None]:
    """(abs, pos) prompt strings for one token, validated against vocab."""
    abs_prompt = f"[{position}]" if config.use_abs else None
    pos_prompt = None
    if config.use_pos:
        if tok.pos is None:
            raise CodecError(
                f"word {position} ({tok.form!r}) has no POS tag but the template requires one"
            )
        pos_prompt = f"[{tok.pos}]"
        if pos_prompt not in vocab.pos_tokens:
            raise CodecError(f"POS tag {tok.pos!r} of word {position} is not in the vocabulary")
    return abs_prompt, pos_prompt


def encode(sentence: Sentence, vocab: PromptVocab, config: TemplateConfig) -> PromptedSentence:
    """Template a gold sentence: every head and label slot concrete."""
    _check_length(len(sentence), vocab, config)
    units = []
    for tok in sentence.tokens:
        abs_prompt, pos_prompt = _unit_fields(tok, tok.index, vocab, config)
        label_prompt = f"[{tok.label}]"
        if label_prompt not in vocab.label_tokens:
            raise CodecError(f"label {tok.label!r} of word {tok.index} is not in the vocabulary")
        units.append(
            TemplateUnit(
                abs=abs_prompt,
                refx=f"[{tok.head}]",
                label=label_prompt,
                pos=pos_prompt,
                word=tok.form,
            )
        )
    return PromptedSentence(units=tuple(units), masked=False)


def mask(d: PromptedSentence) -> PromptedSentence:
    """Replace every head slot with [HEAD] and label slot with [DEP]."""
    if d.masked:
        raise CodecError("sentence is already masked")
    if d.n == 0:
        raise CodecError("cannot mask an empty template")
    units = tuple(
        TemplateUnit(abs=u.abs, refx=HEAD_MASK, label=DEP_MASK, pos=u.pos, word=u.word)
        for u in d.units
    )
    return PromptedSentence(units=units, masked=True)


def encode_masked(
    sentence: Sentence, vocab: PromptVocab, config: TemplateConfig
) -> PromptedSentence:
    """Template a sentence straight to masked form.

    Unlike mask(encode(...)) this never reads heads or labels, so it works
    on inputs whose annotations are absent or outside the vocabulary.
    """
    _check_length(len(sentence), vocab, config)
    units = []
    for tok in sentence.tokens:
        abs_prompt, pos_prompt = _unit_fields(tok, tok.index, vocab, config)
        units.append(
            TemplateUnit(abs=abs_prompt, refx=HEAD_MASK, label=DEP_MASK, pos=pos_prompt, word=tok.form)
        )
    return PromptedSentence(units=tuple(units), masked=True)


def fill_slots(
    d_m: PromptedSentence, heads: Sequence[int], labels: Sequence[str]
) -> PromptedSentence:
    """Write concrete head indices and bare label strings into a masked template."""
    if not d_m.masked:
        raise CodecError("fill_slots expects a masked template")
    if len(heads) != d_m.n or len(labels) != d_m.n:
        raise CodecError(
            f"need {d_m.n} heads and labels, got {len(heads)} and {len(labels)}"
        )
    units = tuple(
        TemplateUnit(abs=u.abs, refx=f"[{h}]", label=f"[{lab}]", pos=u.pos, word=u.word)
        for u, h, lab in zip(d_m.units, heads, labels)
    )
    return PromptedSentence(units=units, masked=False)


def token_strings(d: PromptedSentence) -> list[str]:
    """The template as a flat token-string list, one entry per model position."""
    out: list[str] = []
    for unit in d.units:
        out.extend(unit.tokens())
    return out


def decode(
    filled_tokens: Sequence[str],
    n: int,
    vocab: PromptVocab,
    config: TemplateConfig,
    repair: RepairPolicy | None = None,
) -> ParseResult:
    """Read predicted heads and labels out of a filled token sequence.

    A head slot is legal when it holds an index prompt in {0..n} other than
    the unit's own position; a label slot when it holds a known label
    prompt. Illegal slots are flagged and repaired per policy.
    """
    repair = repair or RepairPolicy()
    width = unit_width(config)
    if n < 0 or len(filled_tokens) != n * width:
        raise DecodeError(
            f"expected {n * width} tokens for {n} units of width {width}, "
            f"got {len(filled_tokens)}"
        )
    heads: list[int] = []
    labels: list[str] = []
    slot_valid: list[bool] = []
    for i in range(1, n + 1):
        base = (i - 1) * width
        offset = base
        if config.use_abs:
            if filled_tokens[offset] != f"[{i}]":
                raise DecodeError(
                    f"unit {i} scaffold broken: absolute prompt slot holds "
                    f"{filled_tokens[offset]!r}, expected [{i}]"
                )
            offset += 1
        raw_head = filled_tokens[offset]
        raw_label = filled_tokens[offset + 1]
        head_value = _index_value(raw_head)
        head_ok = head_value is not None and 0 <= head_value <= n and head_value != i
        label_ok = raw_label in vocab.label_tokens
        ok = head_ok and label_ok
        heads.append(head_value if head_ok else 0)
        labels.append(_bare(raw_label) if label_ok else repair.fallback_label)
        slot_valid.append(ok)
    return ParseResult(heads=tuple(heads), labels=tuple(labels), slot_valid=tuple(slot_valid))


def flatten(d: PromptedSentence) -> str:
    """One-line text form: unit tokens concatenated, units space-separated."""
    for unit in d.units:
        if " " in unit.word:
            raise CodecError(
                f"word {unit.word!r} contains a space and cannot appear in flat text"
            )
    return " ".join("".join(unit.tokens()) for unit in d.units)


def _take_prompt(chunk: str, unit_no: int, what: str) -> tuple[str, str]:
    """Split one leading bracketed lexeme off a unit's flat text."""
    if not chunk.startswith("["):
        raise DecodeError(f"unit {unit_no}: expected a {what} prompt, found {chunk!r}")
    end = chunk.find("]")
    if end < 0:
        raise DecodeError(f"unit {unit_no}: unmatched '[' in {chunk!r}")
    return chunk[: end + 1], chunk[end + 1 :]


def unflatten(text: str, vocab: PromptVocab, config: TemplateConfig) -> PromptedSentence:
    """Invert flatten(). The empty string decodes to the empty template."""
    if text == "":
        return PromptedSentence(units=(), masked=False)
    units: list[TemplateUnit] = []
    mask_states: set[bool] = set()
    for unit_no, chunk in enumerate(text.split(" "), start=1):
        rest = chunk
        abs_prompt = None
        if config.use_abs:
            abs_prompt, rest = _take_prompt(rest, unit_no, "absolute-index")
            if _index_value(abs_prompt) != unit_no:
                raise DecodeError(
                    f"unit {unit_no}: absolute prompt {abs_prompt!r} out of order"
                )
        refx, rest = _take_prompt(rest, unit_no, "head-index")
        if refx != HEAD_MASK and (
            _index_value(refx) is None or _index_value(refx) > vocab.max_index
        ):
            raise DecodeError(f"unit {unit_no}: {refx!r} is not a head prompt or [HEAD]")
        label, rest = _take_prompt(rest, unit_no, "label")
        if label != DEP_MASK and label not in vocab.label_tokens:
            raise DecodeError(f"unit {unit_no}: unknown label prompt {label!r}")
        pos_prompt = None
        if config.use_pos:
            pos_prompt, rest = _take_prompt(rest, unit_no, "POS")
            if pos_prompt not in vocab.pos_tokens:
                raise DecodeError(f"unit {unit_no}: unknown POS prompt {pos_prompt!r}")
        if not rest:
            raise DecodeError(f"unit {unit_no}: missing word after prompts in {chunk!r}")
        try:
            unit = TemplateUnit(abs=abs_prompt, refx=refx, label=label, pos=pos_prompt, word=rest)
        except CodecError as exc:
            raise DecodeError(f"unit {unit_no}: {exc}") from None
        mask_states.add(unit.is_masked)
        units.append(unit)
    if len(mask_states) != 1:
        raise DecodeError("mixed masked and concrete units in one line")
    return PromptedSentence(units=tuple(units), masked=mask_states.pop())


def most_frequent_label(treebank: Iterable[Sentence]) -> str:
    """Modal relation label of a corpus; ties break lexicographically."""
    counts: Counter[str] = Counter()
    for sent in treebank:
        counts.update(sent.labels)
    if not counts:
        raise CodecError("cannot take the most frequent label of an empty corpus")
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
