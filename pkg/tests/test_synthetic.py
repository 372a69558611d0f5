import pytest

from sptparse import (
    LANGUAGES,
    TemplateConfig,
    build_vocab,
    encode,
    generate_corpus,
    generate_multilingual,
    random_sentences,
    validate_tree,
)
from sptparse.synthetic import CORE_LABELS, language_labels


def test_twelve_sorted_languages():
    assert len(LANGUAGES) == 12
    assert list(LANGUAGES) == sorted(LANGUAGES)
    assert {"en", "de", "fr", "ru"} <= set(LANGUAGES)


def test_generate_corpus_is_deterministic():
    a = generate_corpus("en", 20, seed=5)
    b = generate_corpus("en", 20, seed=5)
    assert a == b
    assert generate_corpus("en", 20, seed=6) != a
    assert generate_corpus("de", 20, seed=5) != a


def test_generated_sentences_are_wellformed_trees():
    for lang in LANGUAGES:
        for sent in generate_corpus(lang, 25, seed=1):
            report = validate_tree(sent)
            assert report.is_tree, f"{sent.sent_id}: {report}"
            assert sent.language == lang
            assert all(t.pos is not None for t in sent.tokens)
            assert 1 <= len(sent) <= 20


def test_sentence_ids_are_stable_and_ordered():
    sents = generate_corpus("it", 3, seed=0)
    assert [s.sent_id for s in sents] == ["it-0001", "it-0002", "it-0003"]


def test_each_language_has_a_distinct_extra_label():
    extras = []
    for lang in LANGUAGES:
        labels = language_labels(lang)
        assert set(CORE_LABELS) <= set(labels)
        (extra,) = set(labels) - set(CORE_LABELS)
        extras.append(extra)
    assert len(set(extras)) == len(LANGUAGES)


def test_corpus_label_usage_stays_in_inventory():
    for lang in ("en", "cs", "ro"):
        seen = set()
        for sent in generate_corpus(lang, 60, seed=2):
            seen.update(sent.labels)
        assert seen <= set(language_labels(lang))
        assert "root" in seen


def test_generate_multilingual_groups_by_language():
    sents = generate_multilingual(2, seed=0, languages=("en", "de"))
    assert [s.sent_id for s in sents] == ["en-0001", "en-0002", "de-0001", "de-0002"]
    assert generate_multilingual(1, seed=0)[0].language == LANGUAGES[0]


def test_generated_corpora_encode_cleanly():
    sents = generate_multilingual(5, seed=3)
    config = TemplateConfig(use_abs=True, use_pos=True, max_index=32)
    vocab = build_vocab([sents], config)
    for s in sents:
        encode(s, vocab, config)  # must not raise


def test_generate_corpus_input_errors():
    with pytest.raises(ValueError, match="unknown language"):
        generate_corpus("tlh", 1)
    with pytest.raises(ValueError, match="count"):
        generate_corpus("en", -1)


def test_random_sentences_bounds_and_validity():
    sents = random_sentences(40, seed=9, min_len=2, max_len=7)
    assert len(sents) == 40
    assert sents == random_sentences(40, seed=9, min_len=2, max_len=7)
    for s in sents:
        assert 2 <= len(s) <= 7
        assert s.tokens[0].head == 0
        assert validate_tree(s).is_tree or validate_tree(s).root_count > 1
        for t in s.tokens:
            assert t.head < t.index  # strictly leftward attachment: acyclic
            assert (t.label == "root") == (t.head == 0)


def test_random_sentences_input_errors():
    with pytest.raises(ValueError, match="min_len"):
        random_sentences(1, seed=0, min_len=0)
    with pytest.raises(ValueError, match="min_len"):
        random_sentences(1, seed=0, min_len=5, max_len=2)
