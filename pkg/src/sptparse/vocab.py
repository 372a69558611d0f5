"""Prompt-token inventory and word vocabulary, with cross-corpus unification.

Every structural prompt is a bracketed string added to the vocabulary as a
single token: index prompts ``[0]``..``[max_index]`` (one shared pool for the
absolute and reference positions), label prompts ``[nsubj]``..., POS prompts
``[NOUN]``..., and the two mask prompts ``[HEAD]`` and ``[DEP]``.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .treebank import Sentence

PAD = "<pad>"
UNK = "<unk>"
HEAD_MASK = "[HEAD]"
DEP_MASK = "[DEP]"
MASK_TOKENS = (HEAD_MASK, DEP_MASK)

# Words that would look like a prompt are stored behind this prefix so the
# prompt and word string spaces stay disjoint.
WORD_ESCAPE = "\x01"

VOCAB_HEADER = "sptvocab v1"
_CLASSES = ("idx", "label", "pos", "mask", "word")


class VocabError(ValueError):
    """Invalid vocabulary contents or an unreadable vocabulary file."""


@dataclass(frozen=True)
class TemplateConfig:
    """Switches for the per-word template: absolute-index and POS prompts."""

    use_abs: bool = True
    use_pos: bool = True
    max_index: int = 128

    def __post_init__(self) -> None:
        if self.max_index < 1:
            raise ValueError(f"max_index must be >= 1, got {self.max_index}")


def escape_word(word: str) -> str:
    return WORD_ESCAPE + word if word.startswith("[") else word


def unescape_word(stored: str) -> str:
    return stored[1:] if stored.startswith(WORD_ESCAPE) else stored


class PromptVocab:
    """Immutable token string -> dense id map partitioned into prompt classes.

    ``entries`` lists (token, class) pairs in id order; class is one of
    idx / label / pos / mask / word. Word entries are stored escaped.
    """

    def __init__(self, entries: Sequence[tuple[str, str]]):
        self._entries: tuple[tuple[str, str], ...] = tuple(entries)
        self._token_to_id: dict[str, int] = {}
        index_tokens: dict[int, str] = {}
        labels: set[str] = set()
        pos: set[str] = set()
        masks: set[str] = set()
        words: dict[str, int] = {}
        for i, (token, cls) in enumerate(self._entries):
            if cls not in _CLASSES:
                raise VocabError(f"unknown token class {cls!r} for {token!r}")
            if token in self._token_to_id:
                raise VocabError(f"duplicate token {token!r}")
            self._token_to_id[token] = i
            if cls == "idx":
                if not (token.startswith("[") and token.endswith("]")):
                    raise VocabError(f"malformed index prompt {token!r}")
                try:
                    index_tokens[int(token[1:-1])] = token
                except ValueError:
                    raise VocabError(f"malformed index prompt {token!r}") from None
            elif cls == "label":
                labels.add(token)
            elif cls == "pos":
                pos.add(token)
            elif cls == "mask":
                masks.add(token)
            else:
                if token.startswith("["):
                    raise VocabError(f"word {token!r} must be stored escaped")
                words[token] = i
        if masks != set(MASK_TOKENS):
            raise VocabError(f"mask tokens must be exactly {MASK_TOKENS}, got {sorted(masks)}")
        if sorted(index_tokens) != list(range(len(index_tokens))) or not index_tokens:
            raise VocabError("index prompts must cover [0]..[max_index] contiguously")
        if PAD not in words or UNK not in words:
            raise VocabError(f"word vocabulary must reserve {PAD!r} and {UNK!r}")
        self._index_tokens = tuple(index_tokens[k] for k in range(len(index_tokens)))
        self._labels = frozenset(labels)
        self._pos = frozenset(pos)
        self._words = words

    # ---- views ----------------------------------------------------------

    @property
    def index_tokens(self) -> tuple[str, ...]:
        return self._index_tokens

    @property
    def label_tokens(self) -> frozenset[str]:
        return self._labels

    @property
    def pos_tokens(self) -> frozenset[str]:
        return self._pos

    @property
    def mask_tokens(self) -> tuple[str, str]:
        return MASK_TOKENS

    @property
    def word_vocab(self) -> dict[str, int]:
        return dict(self._words)

    @property
    def max_index(self) -> int:
        return len(self._index_tokens) - 1

    @property
    def entries(self) -> tuple[tuple[str, str], ...]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PromptVocab) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    # ---- lookups --------------------------------------------------------

    @property
    def pad_id(self) -> int:
        return self._token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self._token_to_id[UNK]

    @property
    def head_mask_id(self) -> int:
        return self._token_to_id[HEAD_MASK]

    @property
    def dep_mask_id(self) -> int:
        return self._token_to_id[DEP_MASK]

    def id_of(self, token: str) -> int | None:
        """Exact token lookup (prompts, or already-escaped words)."""
        return self._token_to_id.get(token)

    def word_id(self, word: str) -> int:
        """Word lookup with escaping; out-of-vocabulary words map to <unk>."""
        return self._words.get(escape_word(word), self._words[UNK])

    def token_of(self, token_id: int) -> str:
        return self._entries[token_id][0]

    def class_of(self, token_id: int) -> str:
        return self._entries[token_id][1]

    def index_id(self, k: int) -> int:
        if not 0 <= k <= self.max_index:
            raise VocabError(f"index {k} outside [0, {self.max_index}]")
        return self._token_to_id[self._index_tokens[k]]

    def index_ids(self, upto: int) -> list[int]:
        """Ids of ``[0]``..``[upto]``, the legal head prompts for an n-word sentence."""
        return [self._token_to_id[t] for t in self._index_tokens[: upto + 1]]

    def label_ids(self) -> list[int]:
        return sorted(self._token_to_id[t] for t in self._labels)


def _check_prompt_text(value: str, kind: str) -> None:
    if "[" in value or "]" in value:
        raise VocabError(f"{kind} {value!r} contains a bracket; prompts could not be delimited")
    if "\t" in value or "\n" in value or value == "":
        raise VocabError(f"{kind} {value!r} is empty or contains whitespace controls")
    if value.isdigit():
        raise VocabError(f"{kind} {value!r} would collide with an index prompt")
    if value in ("HEAD", "DEP"):
        raise VocabError(f"{kind} {value!r} would collide with a mask prompt")


def _assemble(
    max_index: int,
    labels: Iterable[str],
    pos: Iterable[str],
    words: Iterable[str],
) -> PromptVocab:
    """Canonical id assignment; sorted within each class for determinism."""
    label_tokens = sorted(f"[{x}]" for x in set(labels))
    pos_tokens = sorted(f"[{x}]" for x in set(pos))
    if set(label_tokens) & set(pos_tokens):
        clash = sorted(set(label_tokens) & set(pos_tokens))
        raise VocabError(f"label and POS prompt strings collide: {clash}")
    word_tokens = sorted({escape_word(w) for w in words} | {PAD, UNK})
    entries: list[tuple[str, str]] = [(PAD, "word"), (UNK, "word")]
    entries += [(t, "mask") for t in MASK_TOKENS]
    entries += [(f"[{k}]", "idx") for k in range(max_index + 1)]
    entries += [(t, "label") for t in label_tokens]
    entries += [(t, "pos") for t in pos_tokens]
    entries += [(t, "word") for t in word_tokens if t not in (PAD, UNK)]
    return PromptVocab(entries)


def build_vocab(
    treebanks: Sequence[Sequence[Sentence]],
    config: TemplateConfig,
    min_word_freq: int = 1,
) -> PromptVocab:
    """Collect label/POS/word inventories from one or more treebanks.

    Words below ``min_word_freq`` are left out and resolve to <unk>;
    prompt inventories are closed over everything observed.
    """
    if not treebanks or all(not tb for tb in treebanks):
        raise VocabError("cannot build a vocabulary from an empty corpus")
    if min_word_freq < 1:
        raise VocabError(f"min_word_freq must be >= 1, got {min_word_freq}")
    labels: set[str] = set()
    pos: set[str] = set()
    word_counts: Counter[str] = Counter()
    for treebank in treebanks:
        for sent in treebank:
            for tok in sent.tokens:
                labels.add(tok.label)
                if config.use_pos and tok.pos is not None:
                    pos.add(tok.pos)
                word_counts[tok.form] += 1
    for label in labels:
        _check_prompt_text(label, "label")
    for tag in pos:
        _check_prompt_text(tag, "POS tag")
    words = [w for w, c in word_counts.items() if c >= min_word_freq]
    return _assemble(config.max_index, labels, pos, words)


def unify_labels(vocabs: Sequence[PromptVocab]) -> PromptVocab:
    """Union per-corpus vocabularies into one shared inventory.

    All inputs must agree on max_index; ids in the result are reassigned
    canonically (sorted within class), so the union is order-independent.
    """
    if not vocabs:
        raise VocabError("nothing to unify")
    max_index = vocabs[0].max_index
    for v in vocabs[1:]:
        if v.max_index != max_index:
            raise VocabError(
                f"cannot unify vocabularies with max_index {max_index} and {v.max_index}"
            )
    labels = {t[1:-1] for v in vocabs for t in v.label_tokens}
    pos = {t[1:-1] for v in vocabs for t in v.pos_tokens}
    words = {unescape_word(w) for v in vocabs for w in v.word_vocab if w not in (PAD, UNK)}
    return _assemble(max_index, labels, pos, words)


def serialize_vocab(vocab: PromptVocab) -> str:
    lines = [VOCAB_HEADER]
    lines += [f"{i}\t{token}\t{cls}" for i, (token, cls) in enumerate(vocab.entries)]
    return "\n".join(lines) + "\n"


def vocab_fingerprint(vocab: PromptVocab) -> str:
    """Stable hash used to pair checkpoints with the vocabulary they index."""
    return hashlib.sha256(serialize_vocab(vocab).encode("utf-8")).hexdigest()


def save_vocab(vocab: PromptVocab, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_vocab(vocab))


def load_vocab(path: str) -> PromptVocab:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.endswith("\n"):
        raise VocabError(f"{path}: truncated vocabulary file")
    lines = text.split("\n")[:-1]
    if not lines or lines[0] != VOCAB_HEADER:
        raise VocabError(f"{path}: not a {VOCAB_HEADER!r} file")
    entries: list[tuple[str, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) != 3:
            raise VocabError(f"{path}:{lineno}: expected 'id<TAB>token<TAB>class'")
        if cols[0] != str(len(entries)):
            raise VocabError(f"{path}:{lineno}: ids must be dense, expected {len(entries)}")
        entries.append((cols[1], cols[2]))
    try:
        return PromptVocab(entries)
    except VocabError as exc:
        raise VocabError(f"{path}: {exc}") from None
