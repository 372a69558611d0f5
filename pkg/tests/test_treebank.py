import pytest
from hypothesis import given, strategies as st

from conftest import FIGURE_CONLLU
from sptparse import (
    ConlluError,
    Sentence,
    Token,
    parse_conllu,
    random_sentences,
    validate_tree,
    write_conllu,
)


def test_parse_figure_example():
    sents = parse_conllu(FIGURE_CONLLU)
    assert len(sents) == 1
    s = sents[0]
    assert s.sent_id == "fig-1"
    assert s.forms == ("He", "loves", "his", "rabbits")
    assert s.heads == (2, 0, 4, 2)
    assert s.labels == ("nsubj", "root", "poss", "dobj")
    assert [t.pos for t in s.tokens] == ["PRON", "VERB", "PRON", "NOUN"]


def test_parse_skips_multiword_and_empty_ids():
    text = (
        "1\tvamos\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
        "2-3\tal\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "2\ta\t_\tADP\t_\t_\t3\tcase\t_\t_\n"
        "3\tmar\t_\tNOUN\t_\t_\t1\tobl\t_\t_\n"
        "3.1\telided\t_\t_\t_\t_\t_\t_\t_\t_\n"
    )
    (s,) = parse_conllu(text)
    assert s.forms == ("vamos", "a", "mar")


def test_parse_multiple_blocks_and_language_comment():
    text = (
        "# sent_id = a\n# language = en\n"
        "1\tGo\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
        "\n"
        "# only a comment in this block\n"
        "\n"
        "1\tStay\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
    )
    sents = parse_conllu(text)
    assert [s.forms[0] for s in sents] == ["Go", "Stay"]
    assert sents[0].language == "en"
    assert sents[1].sent_id is None


def test_parse_strips_bom_and_handles_crlf():
    text = "﻿1\tGo\t_\tVERB\t_\t_\t0\troot\t_\t_\r\n"
    (s,) = parse_conllu(text)
    assert s.forms == ("Go",)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConlluError, match="line 2"):
        parse_conllu("1\tok\t_\tX\t_\t_\t0\troot\t_\t_\nbroken line\n")
    with pytest.raises(ConlluError, match="non-integer HEAD"):
        parse_conllu("1\tok\t_\tX\t_\t_\tzz\troot\t_\t_\n")
    with pytest.raises(ConlluError):
        parse_conllu("1\tok\t_\tX\t_\t_\t1\tdep\t_\t_\n")  # self-loop head
    with pytest.raises(ConlluError):
        parse_conllu("2\tok\t_\tX\t_\t_\t0\troot\t_\t_\n")  # indices not 1..n


def test_token_validation():
    with pytest.raises(ValueError):
        Token(index=0, form="x", head=1, label="dep")
    with pytest.raises(ValueError):
        Token(index=1, form="", head=0, label="root")
    with pytest.raises(ValueError):
        Token(index=2, form="x", head=2, label="dep")
    assert Token(index=1, form="x", head=0, label="root", pos="_").pos is None


def test_write_round_trip_with_unicode_and_missing_pos():
    tokens = (
        Token(index=1, form="café", head=2, label="nsubj", pos=None),
        Token(index=2, form="溶けた", head=0, label="root", pos="VERB"),
    )
    s = Sentence(tokens=tokens, sent_id="u-1", language="xx")
    text = write_conllu([s])
    assert "café" in text and "\t_\t" in text
    (back,) = parse_conllu(text)
    assert back == s


def test_write_rejects_unserializable_fields():
    s = Sentence(tokens=(Token(index=1, form="x", head=0, label="bad\tlabel"),))
    with pytest.raises(ConlluError, match="bad"):
        write_conllu([s])


def test_write_empty_corpus():
    assert write_conllu([]) == ""


def test_validate_tree_good_cycle_and_range():
    good = parse_conllu(FIGURE_CONLLU)[0]
    report = validate_tree(good)
    assert report.is_tree and report.root_count == 1 and not report.has_cycle

    cyc = Sentence(
        tokens=(
            Token(index=1, form="a", head=0, label="root"),
            Token(index=2, form="b", head=3, label="dep"),
            Token(index=3, form="c", head=2, label="dep"),
        )
    )
    r = validate_tree(cyc)
    assert r.has_cycle and not r.is_tree

    oor = Sentence(
        tokens=(
            Token(index=1, form="a", head=0, label="root"),
            Token(index=2, form="b", head=9, label="dep"),
        )
    )
    r = validate_tree(oor)
    assert r.out_of_range_heads == (2,) and not r.is_tree and not r.has_cycle


def test_validate_tree_counts_multiple_roots():
    s = Sentence(
        tokens=(
            Token(index=1, form="a", head=0, label="root"),
            Token(index=2, form="b", head=0, label="root"),
        )
    )
    assert validate_tree(s).root_count == 2


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_conllu_round_trip_property(seed, max_len):
    sents = random_sentences(5, seed=seed, min_len=1, max_len=max_len)
    assert parse_conllu(write_conllu(sents)) == sents
