"""Deterministic synthetic treebanks for training and property tests.

The grammar builds small projective clauses whose attachments are a pure
function of the POS pattern (determiners and adjectives lean on their noun,
nouns and modifiers on the verb, adpositions on the following noun), so a
small model can learn it and trivial baselines cannot. Twelve language
variants share the grammar but differ in lexicon and one extra relation
label, which gives vocabulary unification something real to merge.
"""

from __future__ import annotations

import random
from typing import Sequence

from .treebank import Sentence, Token

CORE_LABELS = ("root", "nsubj", "obj", "det", "amod", "advmod", "case", "obl", "punct")

# form inventories per language: determiners, adjectives, nouns, verbs,
# adverbs, adpositions, and one particle with a language-specific label.
_LEX: dict[str, dict] = {
    "bg": {
        "det": ["tazi", "edna"], "adj": ["golyama", "nova", "stara"],
        "noun": ["kniga", "kotka", "masa", "zhena", "grad"],
        "verb": ["vizhda", "obicha", "chete", "nosi"],
        "adv": ["bavno", "vinagi"], "adp": ["na", "v"], "part": ("se", "expl"),
    },
    "ca": {
        "det": ["el", "una"], "adj": ["gran", "nova", "vella"],
        "noun": ["llibre", "gata", "taula", "dona", "ciutat"],
        "verb": ["veu", "estima", "llegeix", "porta"],
        "adv": ["lentament", "sempre"], "adp": ["de", "en"], "part": ("hi", "iobj"),
    },
    "cs": {
        "det": ["ta", "jedna"], "adj": ["velka", "nova", "stara"],
        "noun": ["kniha", "kocka", "stul", "zena", "mesto"],
        "verb": ["vidi", "miluje", "cte", "nese"],
        "adv": ["pomalu", "vzdy"], "adp": ["na", "ve"], "part": ("se", "aux"),
    },
    "de": {
        "det": ["der", "eine"], "adj": ["grosse", "neue", "alte"],
        "noun": ["Buch", "Katze", "Tisch", "Frau", "Stadt"],
        "verb": ["sieht", "liebt", "liest", "bringt"],
        "adv": ["langsam", "immer"], "adp": ["auf", "in"], "part": ("nicht", "compound"),
    },
    "en": {
        "det": ["the", "a"], "adj": ["big", "new", "old"],
        "noun": ["book", "cat", "table", "woman", "city"],
        "verb": ["sees", "loves", "reads", "brings"],
        "adv": ["slowly", "always"], "adp": ["on", "in"], "part": ("up", "prt"),
    },
    "es": {
        "det": ["el", "una"], "adj": ["grande", "nueva", "vieja"],
        "noun": ["libro", "gata", "mesa", "mujer", "ciudad"],
        "verb": ["ve", "ama", "lee", "trae"],
        "adv": ["despacio", "siempre"], "adp": ["de", "en"], "part": ("no", "neg"),
    },
    "fr": {
        "det": ["le", "une"], "adj": ["grand", "nouvelle", "vieille"],
        "noun": ["livre", "chatte", "table", "femme", "ville"],
        "verb": ["voit", "aime", "lit", "porte"],
        "adv": ["lentement", "toujours"], "adp": ["de", "dans"], "part": ("y", "cop"),
    },
    "it": {
        "det": ["il", "una"], "adj": ["grande", "nuova", "vecchia"],
        "noun": ["libro", "gatta", "tavola", "donna", "citta"],
        "verb": ["vede", "ama", "legge", "porta"],
        "adv": ["lentamente", "sempre"], "adp": ["di", "in"], "part": ("ci", "mark"),
    },
    "nl": {
        "det": ["de", "een"], "adj": ["grote", "nieuwe", "oude"],
        "noun": ["boek", "kat", "tafel", "vrouw", "stad"],
        "verb": ["ziet", "houdt", "leest", "brengt"],
        "adv": ["langzaam", "altijd"], "adp": ["op", "in"], "part": ("er", "xcomp"),
    },
    "no": {
        "det": ["den", "en"], "adj": ["store", "nye", "gamle"],
        "noun": ["bok", "katt", "bord", "kvinne", "by"],
        "verb": ["ser", "elsker", "leser", "bringer"],
        "adv": ["sakte", "alltid"], "adp": ["paa", "i"], "part": ("ikke", "nummod"),
    },
    "ro": {
        "det": ["acest", "o"], "adj": ["mare", "noua", "veche"],
        "noun": ["carte", "pisica", "masa", "femeie", "oras"],
        "verb": ["vede", "iubeste", "citeste", "aduce"],
        "adv": ["incet", "mereu"], "adp": ["pe", "in"], "part": ("nu", "ccomp"),
    },
    "ru": {
        "det": ["eta", "odna"], "adj": ["bolshaya", "novaya", "staraya"],
        "noun": ["kniga", "koshka", "stol", "zhenshchina", "gorod"],
        "verb": ["vidit", "lyubit", "chitaet", "neset"],
        "adv": ["medlenno", "vsegda"], "adp": ["na", "v"], "part": ("zhe", "discourse"),
    },
}

LANGUAGES: tuple[str, ...] = tuple(sorted(_LEX))


def language_labels(language: str) -> tuple[str, ...]:
    """All relation labels the grammar can emit for one language."""
    return CORE_LABELS + (_LEX[language]["part"][1],)


def _add_np(
    rng: random.Random,
    lex: dict,
    parts: list[list],
    noun_slots: dict[int, int],
    np_id: int,
    noun_label: str,
    with_det: bool,
) -> None:
    """Append determiner/adjectives/noun; the noun's head gets patched later."""
    if with_det:
        parts.append([rng.choice(lex["det"]), "DET", "det", ("noun", np_id)])
    for _ in range(rng.randrange(3)):
        parts.append([rng.choice(lex["adj"]), "ADJ", "amod", ("noun", np_id)])
    noun_slots[np_id] = len(parts)
    parts.append([rng.choice(lex["noun"]), "NOUN", noun_label, ("verb", None)])


def _clause(rng: random.Random, language: str) -> list[tuple[str, str, str, int]]:
    """One subject-verb(-object...) clause as (form, pos, label, head) rows."""
    lex = _LEX[language]
    parts: list[list] = []  # [form, pos, label, ref]; ref resolves to a head index
    noun_slots: dict[int, int] = {}
    np_id = 0

    _add_np(rng, lex, parts, noun_slots, np_id, "nsubj", with_det=rng.random() < 0.7)
    verb_slot = len(parts)
    parts.append([rng.choice(lex["verb"]), "VERB", "root", ("root", None)])
    if rng.random() < 0.3:
        form, label = lex["part"]
        parts.append([form, "PART", label, ("verb", None)])
    if rng.random() < 0.6:
        np_id += 1
        _add_np(rng, lex, parts, noun_slots, np_id, "obj", with_det=rng.random() < 0.7)
    if rng.random() < 0.4:
        np_id += 1
        parts.append([rng.choice(lex["adp"]), "ADP", "case", ("noun", np_id)])
        _add_np(rng, lex, parts, noun_slots, np_id, "obl", with_det=rng.random() < 0.4)
    if rng.random() < 0.3:
        parts.append([rng.choice(lex["adv"]), "ADV", "advmod", ("verb", None)])
    if rng.random() < 0.7:
        parts.append([".", "PUNCT", "punct", ("verb", None)])

    rows = []
    for form, pos, label, (kind, key) in parts:
        if kind == "root":
            head = 0
        elif kind == "verb":
            head = verb_slot + 1
        else:
            head = noun_slots[key] + 1
        rows.append((form, pos, label, head))
    return rows


def generate_corpus(language: str, count: int, seed: int = 0) -> list[Sentence]:
    """Deterministic corpus of `count` clauses for one language variant."""
    if language not in _LEX:
        raise ValueError(f"unknown language {language!r}; pick from {LANGUAGES}")
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = random.Random(f"{language}:{seed}")
    sentences = []
    for k in range(count):
        rows = _clause(rng, language)
        tokens = tuple(
            Token(index=i + 1, form=form, head=head, label=label, pos=pos)
            for i, (form, pos, label, head) in enumerate(rows)
        )
        sentences.append(
            Sentence(tokens=tokens, sent_id=f"{language}-{k + 1:04d}", language=language)
        )
    return sentences


def generate_multilingual(
    per_language: int, seed: int = 0, languages: Sequence[str] = LANGUAGES
) -> list[Sentence]:
    out: list[Sentence] = []
    for language in languages:
        out.extend(generate_corpus(language, per_language, seed=seed))
    return out


RANDOM_LABELS = ("root", "nsubj", "obj", "amod", "det", "nmod", "case", "mark")
RANDOM_POS = ("NOUN", "VERB", "ADJ", "DET", "ADP", "ADV")
_RANDOM_WORDS = (
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "[odd]", "[3]", "x[y]",
)


def random_sentences(
    count: int,
    seed: int = 0,
    min_len: int = 1,
    max_len: int = 50,
) -> list[Sentence]:
    """Structurally arbitrary (not grammatical) sentences with valid trees.

    Every non-first word attaches somewhere to its left, so the result is
    acyclic; word 1 is always a root. A few forms deliberately look like
    prompts to exercise word escaping.
    """
    if min_len < 1 or max_len < min_len:
        raise ValueError("need 1 <= min_len <= max_len")
    rng = random.Random(seed)
    out = []
    for k in range(count):
        n = rng.randint(min_len, max_len)
        tokens = []
        for i in range(1, n + 1):
            head = 0 if i == 1 else rng.randrange(i)
            tokens.append(
                Token(
                    index=i,
                    form=rng.choice(_RANDOM_WORDS),
                    head=head,
                    label="root" if head == 0 else rng.choice(RANDOM_LABELS[1:]),
                    pos=rng.choice(RANDOM_POS),
                )
            )
        out.append(Sentence(tokens=tuple(tokens), sent_id=f"rand-{k + 1:05d}"))
    return out
