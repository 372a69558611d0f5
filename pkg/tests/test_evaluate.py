import random

import pytest
from hypothesis import given, strategies as st

from conftest import make_sentence
from sptparse import (
    AblationRow,
    EvalError,
    ParseResult,
    TemplateConfig,
    TrainConfig,
    ModelConfig,
    baseline_parse,
    benchmark_speed,
    bucket_by_index,
    bucket_by_length,
    build_vocab,
    format_ablation_table,
    new_bundle,
    parse_sentences,
    random_sentences,
    run_ablation,
    score,
)

TEMPLATE = TemplateConfig(use_abs=True, use_pos=True, max_index=12)


def perfect(sent) -> ParseResult:
    n = len(sent)
    return ParseResult(heads=sent.heads, labels=sent.labels, slot_valid=(True,) * n)


def test_uas_las_direct_case():
    gold = make_sentence([(2, "nsubj"), (0, "root"), (4, "det"), (2, "obj")])
    pred = ParseResult(
        heads=(2, 0, 2, 2),  # token 3's head is wrong
        labels=("nsubj", "mark", "det", "obj"),  # token 2's label is wrong
        slot_valid=(True, True, True, True),
    )
    report = score([gold], [pred])
    assert report.uas == 0.75
    assert report.las == 0.50
    assert report.token_count == 4
    assert report.sentence_count == 1


def test_las_never_exceeds_uas():
    gold = make_sentence([(0, "root"), (1, "det"), (1, "obj")])
    pred = ParseResult(heads=(0, 1, 2), labels=("root", "obj", "obj"), slot_valid=(True,) * 3)
    report = score([gold], [pred])
    assert report.las <= report.uas


def test_exclude_punct_and_custom_punct_labels():
    gold = make_sentence([(2, "nsubj"), (0, "root"), (2, "punct")])
    pred = ParseResult(heads=(2, 0, 1), labels=("nsubj", "root", "punct"), slot_valid=(True,) * 3)
    assert score([gold], [pred]).uas == pytest.approx(2 / 3)
    filtered = score([gold], [pred], exclude_punct=True)
    assert filtered.uas == 1.0 and filtered.token_count == 2

    other = make_sentence([(2, "nsubj"), (0, "root"), (2, "comma")])
    by_name = score(
        [other], [pred], exclude_punct=True, punct_labels=frozenset({"comma"})
    )
    assert by_name.token_count == 2 and by_name.uas == 1.0


def test_strict_counts_flagged_tokens_wrong():
    gold = make_sentence([(0, "root"), (1, "det")])
    # The repaired values happen to equal gold, but the slot was illegal.
    pred = ParseResult(heads=(0, 1), labels=("root", "det"), slot_valid=(False, True))
    assert score([gold], [pred]).uas == 1.0
    strict = score([gold], [pred], strict=True)
    assert strict.uas == 0.5 and strict.las == 0.5


def test_alignment_errors_name_the_sentence():
    gold = [make_sentence([(0, "root")])]
    with pytest.raises(EvalError, match="1 gold sentences but 2"):
        score(gold, [perfect(gold[0])] * 2)
    short = ParseResult(heads=(0, 1), labels=("root", "det"), slot_valid=(True, True))
    with pytest.raises(EvalError, match="#1"):
        score(gold, [short])


def test_bucket_by_length_partitions_sentences():
    gold = [
        make_sentence([(0, "root")] + [(1, "det")] * 2),  # length 3
        make_sentence([(0, "root")] + [(1, "det")] * 11),  # length 12
        make_sentence([(0, "root")] + [(1, "det")] * 74),  # length 75
    ]
    pred = [perfect(s) for s in gold]
    rows = bucket_by_length(gold, pred, edges=((1, 10), (11, 20)))
    assert [r.range_label for r in rows] == ["1-10", "11-20", "21+"]
    assert [r.sentence_count for r in rows] == [1, 1, 1]
    assert [r.token_count for r in rows] == [3, 12, 75]
    assert all(r.uas == 1.0 and r.las == 1.0 for r in rows)
    assert sum(r.sentence_count for r in rows) == len(gold)

    # No overflow row when nothing lands past the last edge.
    rows = bucket_by_length(gold[:2], pred[:2], edges=((1, 10), (11, 20)))
    assert [r.range_label for r in rows] == ["1-10", "11-20"]


def test_bucket_by_index_partitions_tokens():
    gold = [make_sentence([(0, "root")] + [(1, "det")] * 4)]  # indices 1..5
    pred = [
        ParseResult(
            heads=(0, 1, 1, 9, 1),  # index 4 wrong
            labels=("root", "det", "det", "det", "det"),
            slot_valid=(True,) * 5,
        )
    ]
    rows = bucket_by_index(gold, pred, edges=((1, 2), (3, 4)))
    assert [r.range_label for r in rows] == ["1-2", "3-4", "5+"]
    assert [r.index_count for r in rows] == [2, 2, 1]
    assert rows[0].uas == 1.0
    assert rows[1].uas == 0.5
    assert rows[2].uas == 1.0
    assert sum(r.index_count for r in rows) == 5


def test_bucket_weighted_mean_matches_overall():
    rng = random.Random(4)
    gold = random_sentences(12, seed=21, min_len=1, max_len=30)
    pred = []
    for s in gold:
        n = len(s)
        heads = tuple(rng.choice([t.head, rng.randrange(0, n + 1)]) for t in s.tokens)
        heads = tuple(0 if h == t.index else h for h, t in zip(heads, s.tokens))
        labels = tuple(rng.choice([t.label, "mark"]) for t in s.tokens)
        pred.append(ParseResult(heads=heads, labels=labels, slot_valid=(True,) * n))
    report = score(gold, pred, edges=((1, 5), (6, 10), (11, 20)))
    for rows, count_attr in (
        (report.per_length_bucket, "token_count"),
        (report.per_index_bucket, "index_count"),
    ):
        total = sum(getattr(r, count_attr) for r in rows)
        assert total == report.token_count
        uas_hits = sum(r.uas * getattr(r, count_attr) for r in rows)
        las_hits = sum(r.las * getattr(r, count_attr) for r in rows)
        assert uas_hits == pytest.approx(report.uas * report.token_count)
        assert las_hits == pytest.approx(report.las * report.token_count)


def test_bucket_edge_validation():
    gold = [make_sentence([(0, "root")])]
    pred = [perfect(gold[0])]
    with pytest.raises(EvalError, match="at least one"):
        bucket_by_length(gold, pred, edges=())
    with pytest.raises(EvalError, match="ascending"):
        bucket_by_length(gold, pred, edges=((1, 10), (5, 20)))
    with pytest.raises(EvalError, match="ascending"):
        bucket_by_length(gold, pred, edges=((10, 1),))
    with pytest.raises(EvalError, match="below the first bucket"):
        bucket_by_length(gold, pred, edges=((2, 10),))


@given(st.integers(0, 2**32 - 1))
def test_score_matches_brute_force_oracle(seed):
    rng = random.Random(seed)
    gold = random_sentences(4, seed=seed, min_len=1, max_len=9)
    preds = []
    for s in gold:
        n = len(s)
        heads, labels, valid = [], [], []
        for t in s.tokens:
            h = rng.randrange(0, n + 1)
            heads.append(0 if h == t.index else h)
            labels.append(rng.choice(["root", "det", t.label]))
            valid.append(rng.random() > 0.2)
        preds.append(ParseResult(tuple(heads), tuple(labels), tuple(valid)))

    for strict in (False, True):
        toks = heads_ok = both_ok = 0
        for s, p in zip(gold, preds):
            for i, t in enumerate(s.tokens):
                toks += 1
                ok = p.slot_valid[i] or not strict
                h_ok = ok and p.heads[i] == t.head
                heads_ok += int(h_ok)
                both_ok += int(h_ok and p.labels[i] == t.label)
        report = score(gold, preds, strict=strict)
        assert report.token_count == toks
        assert report.uas == pytest.approx(heads_ok / toks)
        assert report.las == pytest.approx(both_ok / toks)
        assert report.las <= report.uas


def test_baseline_parsers():
    gold = [make_sentence([(0, "root"), (1, "det"), (2, "obj")])]
    prev = baseline_parse(gold, "previous")[0]
    assert prev.heads == (0, 1, 2)
    root = baseline_parse(gold, "root", label="dep")[0]
    assert root.heads == (0, 0, 0)
    assert root.labels == ("dep", "dep", "dep")
    assert baseline_parse([make_sentence([(0, "root")])], "previous")[0].heads == (0,)
    with pytest.raises(EvalError, match="baseline mode"):
        baseline_parse(gold, "random")
    # On this chain-shaped sentence the previous-word baseline is exact.
    assert score(gold, [prev]).uas == 1.0


@pytest.fixture(scope="module")
def tiny_setup():
    sents = random_sentences(6, seed=30, min_len=2, max_len=5)
    vocab = build_vocab([sents], TEMPLATE)
    config = ModelConfig(
        vocab_size=len(vocab), arch="encoder", layers=1, heads=2,
        model_dim=16, ff_dim=32, max_positions=64, dropout=0.0, seed=0,
    )
    return sents, vocab, new_bundle(config, vocab)


def test_parse_sentences_end_to_end(tiny_setup):
    sents, vocab, bundle = tiny_setup
    results = parse_sentences(bundle, sents, vocab, TEMPLATE)
    assert len(results) == len(sents)
    for s, r in zip(sents, results):
        assert r.n == len(s)
        assert all(0 <= h <= len(s) for h in r.heads)
        assert all(f"[{lab}]" in vocab.label_tokens for lab in r.labels)
        assert all(r.slot_valid)  # restricted prediction only emits legal prompts
    score(sents, results)  # alignment holds


def test_parse_sentences_decoder_path(tiny_setup):
    sents, vocab, _ = tiny_setup
    config = ModelConfig(
        vocab_size=len(vocab), arch="decoder", layers=1, heads=2,
        model_dim=16, ff_dim=32, max_positions=96, dropout=0.0, seed=0,
    )
    dec = new_bundle(config, vocab)
    results = parse_sentences(dec, sents[:2], vocab, TEMPLATE)
    assert [r.n for r in results] == [len(s) for s in sents[:2]]
    assert all(all(r.slot_valid) for r in results)


def test_run_ablation_rows_and_deltas():
    train_sents = random_sentences(6, seed=31, min_len=2, max_len=5)
    test_sents = random_sentences(4, seed=32, min_len=2, max_len=5)
    model_config = ModelConfig(
        vocab_size=1, layers=1, heads=2, model_dim=16, ff_dim=32,
        max_positions=64, dropout=0.0,
    )
    tc = TrainConfig(batch_size=4, learning_rate=1e-3, epochs=1)
    rows = run_ablation(train_sents, test_sents, TEMPLATE, model_config, tc, seed=1)
    assert [r.variant for r in rows] == ["base", "no_abs", "no_pos"]
    base = rows[0]
    assert base.delta_uas is None and base.delta_las is None
    for row in rows[1:]:
        assert row.error is None
        assert row.delta_uas == pytest.approx(row.uas - base.uas)
        assert row.delta_las == pytest.approx(row.las - base.las)

    with pytest.raises(EvalError, match="unknown ablation variant"):
        run_ablation(train_sents, test_sents, TEMPLATE, model_config, tc, variants=("base",))
    with pytest.raises(EvalError, match="unknown ablation variant"):
        run_ablation(train_sents, test_sents, TEMPLATE, model_config, tc, variants=("nope",))


def test_run_ablation_survives_divergence():
    train_sents = random_sentences(4, seed=33, min_len=2, max_len=4)
    model_config = ModelConfig(
        vocab_size=1, layers=1, heads=2, model_dim=16, ff_dim=32,
        max_positions=64, dropout=0.0,
    )
    tc = TrainConfig(
        batch_size=2, learning_rate=1e18, epochs=2, grad_clip=None, schedule="constant"
    )
    rows = run_ablation(train_sents, train_sents, TEMPLATE, model_config, tc, variants=("no_pos",))
    assert [r.variant for r in rows] == ["base", "no_pos"]
    for row in rows:
        assert row.error is not None and "non-finite" in row.error
        assert row.uas is None and row.delta_uas is None


def test_format_ablation_table():
    rows = [
        AblationRow("base", 0.7530, 0.6667, None, None),
        AblationRow("no_abs", 0.6040, 0.5125, -0.1490, -0.1542),
        AblationRow("broken", None, None, None, None, error="non-finite loss"),
    ]
    table = format_ablation_table(rows)
    lines = table.splitlines()
    assert lines[0].split() == ["variant", "UAS", "LAS"]
    assert "75.30" in lines[1] and "(" not in lines[1]
    assert "60.40(-14.90)" in lines[2]
    assert "51.25(-15.42)" in lines[2]
    assert "training failed: non-finite loss" in lines[3]


def test_benchmark_speed_rate_identity(tiny_setup):
    sents, vocab, bundle = tiny_setup
    report = benchmark_speed(bundle, sents, vocab, TEMPLATE, batch_size=2, threads=1)
    assert report.total_sentences == len(sents)
    assert report.batch_size == 2 and report.threads == 1
    assert report.wall_seconds > 0
    assert report.sentences_per_second == report.total_sentences / report.wall_seconds
    with pytest.raises(EvalError, match="empty"):
        benchmark_speed(bundle, [], vocab, TEMPLATE)
    with pytest.raises(EvalError, match=">= 1"):
        benchmark_speed(bundle, sents, vocab, TEMPLATE, batch_size=0)
