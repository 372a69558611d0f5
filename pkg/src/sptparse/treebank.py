"""CoNLL-U treebank reading, writing, and tree diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


class ConlluError(ValueError):
    """Malformed CoNLL-U input or a sentence that cannot be serialized."""


@dataclass(frozen=True)
class Token:
    """One word of a sentence with its head attachment.

    ``head`` is the 1-based index of the governing word, 0 for the root.
    """

    index: int
    form: str
    head: int
    label: str
    pos: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise ValueError(f"token head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise ValueError(f"token {self.index} is its own head")
        if not self.form or "\t" in self.form or "\n" in self.form:
            raise ValueError(f"token {self.index} has an empty or tab/newline form")
        # '_' is the CoNLL-U absence marker, so it can never be a real tag.
        if self.pos == "_":
            object.__setattr__(self, "pos", None)


@dataclass(frozen=True)
class Sentence:
    """An ordered, contiguously indexed token list."""

    tokens: tuple[Token, ...]
    sent_id: str | None = None
    language: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for k, tok in enumerate(self.tokens):
            if tok.index != k + 1:
                raise ValueError(
                    f"token at position {k} has index {tok.index}, expected {k + 1}"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> tuple[str, ...]:
        return tuple(t.form for t in self.tokens)

    @property
    def heads(self) -> tuple[int, ...]:
        return tuple(t.head for t in self.tokens)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.tokens)


@dataclass(frozen=True)
class TreeReport:
    """Diagnostics from :func:`validate_tree`; never blocks loading."""

    root_count: int
    has_cycle: bool
    out_of_range_heads: tuple[int, ...] = field(default_factory=tuple)

    @property
    def is_tree(self) -> bool:
        return self.root_count == 1 and not self.has_cycle and not self.out_of_range_heads


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Uses the ID, FORM, UPOS, HEAD, and DEPREL columns. Multiword-token
    ranges (``3-4``) and empty nodes (``5.1``) are dropped so raw UD files
    load without preprocessing. Comment-only blocks yield no sentence.
    """
    if text.startswith("﻿"):
        text = text[1:]
    sentences: list[Sentence] = []
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.strip() == "":
            if block:
                sent = _parse_block(block)
                if sent is not None:
                    sentences.append(sent)
                block = []
        else:
            block.append((lineno, line))
    if block:
        sent = _parse_block(block)
        if sent is not None:
            sentences.append(sent)
    return sentences


def _parse_block(lines: list[tuple[int, str]]) -> Sentence | None:
    sent_id: str | None = None
    language: str | None = None
    tokens: list[Token] = []
    for lineno, line in lines:
        if line.startswith("#"):
            if line.startswith("# sent_id ="):
                sent_id = line.split("=", 1)[1].strip()
            elif line.startswith("# language ="):
                language = line.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) < 8:
            raise ConlluError(f"line {lineno}: expected >= 8 tab-separated columns")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue
        try:
            index = int(tok_id)
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer ID {tok_id!r}") from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer HEAD {cols[6]!r}") from None
        try:
            tokens.append(
                Token(index=index, form=cols[1], head=head, label=cols[7], pos=cols[3])
            )
        except ValueError as exc:
            raise ConlluError(f"line {lineno}: {exc}") from None
    if not tokens:
        return None
    first_line = lines[0][0]
    try:
        return Sentence(tokens=tuple(tokens), sent_id=sent_id, language=language)
    except ValueError as exc:
        raise ConlluError(f"block at line {first_line}: {exc}") from None


def write_conllu(sentences: Iterable[Sentence]) -> str:
    """Serialize sentences as 10-column CoNLL-U; inverse of :func:`parse_conllu`."""
    out: list[str] = []
    for k, sent in enumerate(sentences):
        name = sent.sent_id if sent.sent_id is not None else f"#{k}"
        if sent.sent_id is not None:
            _check_meta(sent.sent_id, name, "sent_id")
            out.append(f"# sent_id = {sent.sent_id}")
        if sent.language is not None:
            _check_meta(sent.language, name, "language")
            out.append(f"# language = {sent.language}")
        for tok in sent.tokens:
            for fieldname, value in (("label", tok.label), ("pos", tok.pos)):
                if value is not None and ("\t" in value or "\n" in value or value == ""):
                    raise ConlluError(
                        f"sentence {name}, token {tok.index}: "
                        f"{fieldname} {value!r} cannot be serialized"
                    )
            pos = tok.pos if tok.pos is not None else "_"
            out.append(
                f"{tok.index}\t{tok.form}\t_\t{pos}\t_\t_\t{tok.head}\t{tok.label}\t_\t_"
            )
        out.append("")
    return "\n".join(out) + "\n" if out else ""


def _check_meta(value: str, name: str, fieldname: str) -> None:
    if "\n" in value or "\t" in value or value != value.strip():
        raise ConlluError(f"sentence {name}: {fieldname} {value!r} cannot be serialized")


def validate_tree(sentence: Sentence) -> TreeReport:
    """Diagnose the head structure: root count, cycles, out-of-range heads.

    A cycle means some token's head chain revisits a token without ever
    reaching the root; chains that run out of range simply terminate.
    """
    n = len(sentence)
    heads = {t.index: t.head for t in sentence.tokens}
    out_of_range = tuple(t.index for t in sentence.tokens if t.head > n)
    # reaches[i]: True if i's chain reaches 0, False if it loops.
    reaches: dict[int, bool] = {}
    has_cycle = False
    for tok in sentence.tokens:
        path: list[int] = []
        on_path: set[int] = set()
        node = tok.index
        while True:
            if node in reaches:
                verdict = reaches[node]
                break
            if node == 0 or node not in heads:
                verdict = True  # root, or dead end past an out-of-range head
                break
            if node in on_path:
                verdict = False
                break
            path.append(node)
            on_path.add(node)
            node = heads[node]
        for seen in path:
            reaches[seen] = verdict
        if not verdict:
            has_cycle = True
    root_count = sum(1 for t in sentence.tokens if t.head == 0)
    return TreeReport(root_count=root_count, has_cycle=has_cycle, out_of_range_heads=out_of_range)
