"""Attachment scoring, bucket breakdowns, prompt ablations, and throughput.

UAS counts tokens whose predicted head is right; LAS additionally requires
the right relation label. Bucket tables slice the same counts by sentence
length and by word index.
"""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import torch

from .codec import (
    ParseResult,
    RepairPolicy,
    decode,
    encode,
    encode_masked,
    mask,
    most_frequent_label,
)
from .model import (
    ModelBundle,
    ModelConfig,
    TrainConfig,
    TrainingError,
    new_bundle,
    predict_decoder_constrained,
    predict_encoder_batch,
    train,
)
from .treebank import Sentence
from .vocab import PromptVocab, TemplateConfig, build_vocab

DEFAULT_EDGES: tuple[tuple[int, int], ...] = (
    (1, 10),
    (11, 20),
    (21, 30),
    (31, 40),
    (41, 50),
    (51, 60),
    (61, 70),
)

DEFAULT_PUNCT_LABELS = frozenset({"punct"})


class EvalError(ValueError):
    """Misaligned gold/prediction material or malformed bucket edges."""


@dataclass(frozen=True)
class LengthBucketRow:
    low: int
    high: int | None  # None marks the open-ended overflow bucket
    sentence_count: int
    token_count: int
    uas: float
    las: float

    @property
    def range_label(self) -> str:
        return f"{self.low}-{self.high}" if self.high is not None else f"{self.low}+"


@dataclass(frozen=True)
class IndexBucketRow:
    low: int
    high: int | None
    index_count: int
    uas: float
    las: float

    @property
    def range_label(self) -> str:
        return f"{self.low}-{self.high}" if self.high is not None else f"{self.low}+"


@dataclass(frozen=True)
class EvalReport:
    uas: float
    las: float
    token_count: int
    sentence_count: int
    per_length_bucket: tuple[LengthBucketRow, ...]
    per_index_bucket: tuple[IndexBucketRow, ...]


@dataclass(frozen=True)
class SpeedReport:
    sentences_per_second: float
    total_sentences: int
    wall_seconds: float
    batch_size: int
    threads: int = 1


@dataclass(frozen=True)
class AblationRow:
    variant: str
    uas: float | None
    las: float | None
    delta_uas: float | None  # vs the base row; None for base itself or on error
    delta_las: float | None
    error: str | None = None


def _check_alignment(gold: Sequence[Sentence], pred: Sequence[ParseResult]) -> None:
    if len(gold) != len(pred):
        raise EvalError(f"{len(gold)} gold sentences but {len(pred)} predictions")
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != p.n:
            name = g.sent_id or f"#{k + 1}"
            raise EvalError(
                f"sentence {name}: {len(g)} gold tokens but {p.n} predicted"
            )


def _token_scored(label: str, exclude_punct: bool, punct_labels: frozenset[str]) -> bool:
    return not (exclude_punct and label in punct_labels)


def _token_correct(
    gold: Sentence, pred: ParseResult, i: int, strict: bool
) -> tuple[bool, bool]:
    """(head correct, head and label correct) for token i (0-based)."""
    if strict and not pred.slot_valid[i]:
        return False, False
    tok = gold.tokens[i]
    head_ok = pred.heads[i] == tok.head
    return head_ok, head_ok and pred.labels[i] == tok.label


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _check_edges(edges: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    out = [(int(lo), int(hi)) for lo, hi in edges]
    if not out:
        raise EvalError("need at least one bucket edge")
    prev_hi = 0
    for lo, hi in out:
        if lo > hi or lo <= prev_hi:
            raise EvalError(f"bucket edges must be ascending and non-overlapping: {edges}")
        prev_hi = hi
    return out


def _bucket_of(value: int, edges: list[tuple[int, int]]) -> int:
    """Bucket index for a value; len(edges) means the overflow bucket."""
    if value < edges[0][0]:
        raise EvalError(f"value {value} falls below the first bucket {edges[0]}")
    for b, (lo, hi) in enumerate(edges):
        if lo <= value <= hi:
            return b
    return len(edges)


def bucket_by_length(
    gold: Sequence[Sentence],
    pred: Sequence[ParseResult],
    edges: Sequence[tuple[int, int]] = DEFAULT_EDGES,
    exclude_punct: bool = False,
    punct_labels: frozenset[str] = DEFAULT_PUNCT_LABELS,
    strict: bool = False,
) -> tuple[LengthBucketRow, ...]:
    """Per-sentence-length-range attachment scores; overflow row only if hit."""
    _check_alignment(gold, pred)
    spans = _check_edges(edges)
    n_buckets = len(spans) + 1
    sents = [0] * n_buckets
    toks = [0] * n_buckets
    heads = [0] * n_buckets
    both = [0] * n_buckets
    for g, p in zip(gold, pred):
        b = _bucket_of(len(g), spans)
        sents[b] += 1
        for i, tok in enumerate(g.tokens):
            if not _token_scored(tok.label, exclude_punct, punct_labels):
                continue
            h_ok, l_ok = _token_correct(g, p, i, strict)
            toks[b] += 1
            heads[b] += int(h_ok)
            both[b] += int(l_ok)
    rows = [
        LengthBucketRow(
            low=lo,
            high=hi,
            sentence_count=sents[b],
            token_count=toks[b],
            uas=_ratio(heads[b], toks[b]),
            las=_ratio(both[b], toks[b]),
        )
        for b, (lo, hi) in enumerate(spans)
    ]
    if sents[len(spans)]:
        b = len(spans)
        rows.append(
            LengthBucketRow(
                low=spans[-1][1] + 1,
                high=None,
                sentence_count=sents[b],
                token_count=toks[b],
                uas=_ratio(heads[b], toks[b]),
                las=_ratio(both[b], toks[b]),
            )
        )
    return tuple(rows)


def bucket_by_index(
    gold: Sequence[Sentence],
    pred: Sequence[ParseResult],
    edges: Sequence[tuple[int, int]] = DEFAULT_EDGES,
    exclude_punct: bool = False,
    punct_labels: frozenset[str] = DEFAULT_PUNCT_LABELS,
    strict: bool = False,
) -> tuple[IndexBucketRow, ...]:
    """Attachment scores sliced by each word's own index within its sentence."""
    _check_alignment(gold, pred)
    spans = _check_edges(edges)
    n_buckets = len(spans) + 1
    toks = [0] * n_buckets
    heads = [0] * n_buckets
    both = [0] * n_buckets
    overflow_hit = False
    for g, p in zip(gold, pred):
        for i, tok in enumerate(g.tokens):
            if not _token_scored(tok.label, exclude_punct, punct_labels):
                continue
            b = _bucket_of(tok.index, spans)
            overflow_hit = overflow_hit or b == len(spans)
            toks[b] += 1
            h_ok, l_ok = _token_correct(g, p, i, strict)
            heads[b] += int(h_ok)
            both[b] += int(l_ok)
    rows = [
        IndexBucketRow(
            low=lo,
            high=hi,
            index_count=toks[b],
            uas=_ratio(heads[b], toks[b]),
            las=_ratio(both[b], toks[b]),
        )
        for b, (lo, hi) in enumerate(spans)
    ]
    if overflow_hit:
        b = len(spans)
        rows.append(
            IndexBucketRow(
                low=spans[-1][1] + 1,
                high=None,
                index_count=toks[b],
                uas=_ratio(heads[b], toks[b]),
                las=_ratio(both[b], toks[b]),
            )
        )
    return tuple(rows)


def score(
    gold: Sequence[Sentence],
    pred: Sequence[ParseResult],
    exclude_punct: bool = False,
    punct_labels: frozenset[str] = DEFAULT_PUNCT_LABELS,
    strict: bool = False,
    edges: Sequence[tuple[int, int]] = DEFAULT_EDGES,
) -> EvalReport:
    """Corpus UAS/LAS plus the two bucket breakdowns in one report."""
    _check_alignment(gold, pred)
    toks = 0
    heads = 0
    both = 0
    for g, p in zip(gold, pred):
        for i, tok in enumerate(g.tokens):
            if not _token_scored(tok.label, exclude_punct, punct_labels):
                continue
            h_ok, l_ok = _token_correct(g, p, i, strict)
            toks += 1
            heads += int(h_ok)
            both += int(l_ok)
    return EvalReport(
        uas=_ratio(heads, toks),
        las=_ratio(both, toks),
        token_count=toks,
        sentence_count=len(gold),
        per_length_bucket=bucket_by_length(
            gold, pred, edges, exclude_punct, punct_labels, strict
        ),
        per_index_bucket=bucket_by_index(
            gold, pred, edges, exclude_punct, punct_labels, strict
        ),
    )


def baseline_parse(
    sentences: Sequence[Sentence], mode: str, label: str = "root"
) -> list[ParseResult]:
    """Trivial reference parsers: attach every word to the previous one or to root."""
    if mode not in ("previous", "root"):
        raise EvalError(f"baseline mode must be 'previous' or 'root', got {mode!r}")
    out = []
    for s in sentences:
        n = len(s)
        heads = tuple(i - 1 for i in range(1, n + 1)) if mode == "previous" else (0,) * n
        out.append(
            ParseResult(heads=heads, labels=(label,) * n, slot_valid=(True,) * n)
        )
    return out


def parse_sentences(
    bundle: ModelBundle,
    sentences: Sequence[Sentence],
    vocab: PromptVocab,
    template: TemplateConfig,
    repair: RepairPolicy | None = None,
    batch_size: int = 32,
) -> list[ParseResult]:
    """Full prediction pipeline: template, fill slots with the model, decode."""
    repair = repair or RepairPolicy()
    masked = [encode_masked(s, vocab, template) for s in sentences]
    if bundle.config.arch == "encoder":
        filled = predict_encoder_batch(bundle, masked, vocab, batch_size=batch_size)
    else:
        filled = [predict_decoder_constrained(bundle, d_m, vocab) for d_m in masked]
    return [
        decode(tokens, d_m.n, vocab, template, repair)
        for tokens, d_m in zip(filled, masked)
    ]


def _train_variant(
    train_sents: Sequence[Sentence],
    template: TemplateConfig,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
    min_word_freq: int,
) -> tuple[ModelBundle, PromptVocab]:
    vocab = build_vocab([train_sents], template, min_word_freq=min_word_freq)
    config = replace(model_config, vocab_size=len(vocab), seed=seed)
    bundle = new_bundle(config, vocab=vocab)
    dataset = [(mask(encode(s, vocab, template)), encode(s, vocab, template)) for s in train_sents]
    train(bundle, dataset, vocab, train_config, rng_seed=seed)
    return bundle, vocab


VARIANT_TEMPLATES: dict[str, Callable[[TemplateConfig], TemplateConfig]] = {
    "base": lambda t: t,
    "no_abs": lambda t: TemplateConfig(use_abs=False, use_pos=t.use_pos, max_index=t.max_index),
    "no_pos": lambda t: TemplateConfig(use_abs=t.use_abs, use_pos=False, max_index=t.max_index),
}


def run_ablation(
    train_sents: Sequence[Sentence],
    test_sents: Sequence[Sentence],
    base_template: TemplateConfig,
    model_config: ModelConfig,
    train_config: TrainConfig,
    variants: Sequence[str] = ("no_abs", "no_pos"),
    seed: int = 0,
    exclude_punct: bool = False,
    min_word_freq: int = 1,
) -> list[AblationRow]:
    """Retrain with prompt components removed and report score deltas vs base.

    Every variant sees the same seed, sentences and optimizer settings; only
    the template differs. A variant that fails to train is reported with its
    error instead of aborting the rest.
    """
    for v in variants:
        if v not in VARIANT_TEMPLATES or v == "base":
            raise EvalError(f"unknown ablation variant {v!r}")
    rows: list[AblationRow] = []
    base_uas = base_las = None
    fallback = most_frequent_label(train_sents)
    for name in ("base", *variants):
        template = VARIANT_TEMPLATES[name](base_template)
        try:
            bundle, vocab = _train_variant(
                train_sents, template, model_config, train_config, seed, min_word_freq
            )
            results = parse_sentences(
                bundle,
                test_sents,
                vocab,
                template,
                repair=RepairPolicy(fallback_label=fallback),
            )
            report = score(test_sents, results, exclude_punct=exclude_punct)
        except TrainingError as exc:
            rows.append(
                AblationRow(
                    variant=name, uas=None, las=None, delta_uas=None, delta_las=None,
                    error=str(exc),
                )
            )
            continue
        if name == "base":
            base_uas, base_las = report.uas, report.las
            rows.append(
                AblationRow(
                    variant=name, uas=report.uas, las=report.las,
                    delta_uas=None, delta_las=None,
                )
            )
        else:
            rows.append(
                AblationRow(
                    variant=name,
                    uas=report.uas,
                    las=report.las,
                    delta_uas=None if base_uas is None else report.uas - base_uas,
                    delta_las=None if base_las is None else report.las - base_las,
                )
            )
    return rows


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    """Percent scores with signed parenthesized deltas under the base row."""
    out = [f"{'variant':<10} {'UAS':>14} {'LAS':>14}"]
    for row in rows:
        if row.error is not None:
            out.append(f"{row.variant:<10} training failed: {row.error}")
            continue
        cells = []
        for value, delta in ((row.uas, row.delta_uas), (row.las, row.delta_las)):
            text = f"{100 * value:.2f}"
            if delta is not None:
                text += f"({100 * delta:+.2f})"
            cells.append(f"{text:>14}")
        out.append(f"{row.variant:<10} {cells[0]} {cells[1]}")
    return "\n".join(out)


def benchmark_speed(
    bundle: ModelBundle,
    sentences: Sequence[Sentence],
    vocab: PromptVocab,
    template: TemplateConfig,
    batch_size: int = 1,
    threads: int = 1,
    warmup: bool = True,
) -> SpeedReport:
    """Wall-clock rate of the full parse pipeline, warm-up pass excluded."""
    if not sentences:
        raise EvalError("cannot benchmark an empty dataset")
    if batch_size < 1 or threads < 1:
        raise EvalError("batch_size and threads must be >= 1")
    previous_threads = torch.get_num_threads()
    torch.set_num_threads(threads)
    try:
        if warmup:
            parse_sentences(bundle, sentences[:1], vocab, template, batch_size=batch_size)
        # Collect before the clock starts so the timed window does not pay
        # for garbage accumulated by earlier work.
        gc.collect()
        start = time.perf_counter()
        parse_sentences(bundle, sentences, vocab, template, batch_size=batch_size)
        wall = time.perf_counter() - start
    finally:
        torch.set_num_threads(previous_threads)
    return SpeedReport(
        sentences_per_second=len(sentences) / wall,
        total_sentences=len(sentences),
        wall_seconds=wall,
        batch_size=batch_size,
        threads=threads,
    )
