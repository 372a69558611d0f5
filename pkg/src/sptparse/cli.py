"""Command-line front end: vocab / encode / train / predict / eval / analyze / bench.

Runs are driven by flags plus an optional JSON config file; flags override
file values, and the SPT_SEED environment variable overrides both. Every
command that writes an artifact also writes the fully resolved settings next
to it, so any run can be reproduced from its snapshot alone.

Exit codes: 0 success, 2 input or usage error, 3 runtime/training failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import torch

from .codec import (
    CodecError,
    ParseResult,
    RepairPolicy,
    encode,
    encode_masked,
    mask,
    flatten,
    most_frequent_label,
)
from .evaluate import (
    DEFAULT_EDGES,
    DEFAULT_PUNCT_LABELS,
    EvalError,
    EvalReport,
    benchmark_speed,
    parse_sentences,
    score,
)
from .model import (
    CheckpointError,
    ModelConfig,
    TokenizationError,
    TrainConfig,
    TrainingError,
    load_checkpoint,
    new_bundle,
    save_checkpoint,
    train,
)
from .treebank import ConlluError, Sentence, Token, parse_conllu, write_conllu
from .vocab import (
    PromptVocab,
    TemplateConfig,
    VocabError,
    build_vocab,
    load_vocab,
    save_vocab,
    unify_labels,
)

_INPUT_ERRORS = (
    OSError,
    ConlluError,
    VocabError,
    CodecError,
    EvalError,
    CheckpointError,
    TokenizationError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
)


# ---------------------------------------------------------------------------
# Config plumbing


_CONFIG_KEYS = {
    "train_path",
    "dev_path",
    "test_path",
    "vocab_path",
    "checkpoint_path",
    "out_dir",
    "seed",
    "template",
    "model",
    "train",
    "eval",
}
_MODEL_KEYS = {"arch", "layers", "heads", "model_dim", "ff_dim", "max_positions", "dropout"}
_EVAL_KEYS = {"exclude_punct", "punct_labels", "edges"}


def load_run_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    for key, allowed in (("model", _MODEL_KEYS), ("eval", _EVAL_KEYS)):
        extra = set(raw.get(key, {})) - allowed
        if extra:
            raise ValueError(f"{path}: unknown {key} keys {sorted(extra)}")
    return raw


def resolve_seed(file_seed: int | None, flag_seed: int | None) -> int:
    env = os.environ.get("SPT_SEED")
    if env is not None:
        return int(env)
    if flag_seed is not None:
        return flag_seed
    return file_seed if file_seed is not None else 0


def _config_of(args: argparse.Namespace) -> dict:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return {}


def _pick(flag_value, config: dict, key: str, default=None):
    """Flag if given, else config file value, else default."""
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _require(value, what: str):
    if value is None:
        raise ValueError(f"missing required {what} (flag or config file)")
    return value


def _read_treebank(path: str) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh.read())


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_snapshot(anchor: Path, payload: dict) -> None:
    """Resolved-settings record next to an output artifact."""
    path = anchor.with_name(anchor.name + ".run.json")
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def parse_edges(text: str) -> tuple[tuple[int, int], ...]:
    """'1-10,11-20' -> ((1, 10), (11, 20))."""
    spans = []
    for piece in text.split(","):
        lo, sep, hi = piece.strip().partition("-")
        if not sep or not lo.isdigit() or not hi.isdigit():
            raise ValueError(f"bad bucket edges {text!r}; expected like '1-10,11-20'")
        spans.append((int(lo), int(hi)))
    return tuple(spans)


def _eval_flags(args: argparse.Namespace, config: dict) -> tuple[bool, frozenset[str], tuple]:
    eval_cfg = config.get("eval", {})
    exclude = args.exclude_punct or bool(eval_cfg.get("exclude_punct", False))
    if getattr(args, "punct_labels", None):
        punct = frozenset(x for x in args.punct_labels.split(",") if x)
    elif "punct_labels" in eval_cfg:
        punct = frozenset(eval_cfg["punct_labels"])
    else:
        punct = DEFAULT_PUNCT_LABELS
    if getattr(args, "edges", None):
        edges = parse_edges(args.edges)
    elif "edges" in eval_cfg:
        edges = tuple((int(lo), int(hi)) for lo, hi in eval_cfg["edges"])
    else:
        edges = DEFAULT_EDGES
    return exclude, punct, edges


def _template_from_meta(meta: dict) -> TemplateConfig:
    block = meta.get("template")
    if not block:
        raise CheckpointError("checkpoint carries no template settings")
    return TemplateConfig(**block)


def _pred_file_results(gold: list[Sentence], pred: list[Sentence], pred_path: str) -> list[ParseResult]:
    if len(gold) != len(pred):
        raise EvalError(
            f"{pred_path}: {len(pred)} sentences but gold has {len(gold)}"
        )
    out = []
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            name = g.sent_id or f"#{k + 1}"
            raise EvalError(f"{pred_path}: sentence {name} token count differs from gold")
        out.append(
            ParseResult(heads=p.heads, labels=p.labels, slot_valid=(True,) * len(p))
        )
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_vocab(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if args.action == "build":
        template = TemplateConfig(
            use_abs=True, use_pos=not args.no_pos, max_index=args.max_index
        )
        treebanks = [_read_treebank(p) for p in args.inputs]
        vocab = build_vocab(treebanks, template, min_word_freq=args.min_word_freq)
    else:
        vocab = unify_labels([load_vocab(p) for p in args.inputs])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_vocab(vocab, str(out))
    _write_snapshot(
        out,
        {
            "command": f"vocab {args.action}",
            "inputs": list(args.inputs),
            "out": str(out),
            "max_index": getattr(args, "max_index", vocab.max_index),
            "min_word_freq": getattr(args, "min_word_freq", None),
            "no_pos": getattr(args, "no_pos", None),
        },
    )
    print(
        f"wrote {out}: {len(vocab)} tokens "
        f"({len(vocab.label_tokens)} labels, {len(vocab.pos_tokens)} pos, "
        f"max index {vocab.max_index})"
    )
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    vocab = load_vocab(args.vocab)
    template = TemplateConfig(
        use_abs=not args.ablate_abs,
        use_pos=not args.ablate_pos,
        max_index=vocab.max_index,
    )
    sentences = _read_treebank(args.input)
    lines = []
    for k, s in enumerate(sentences):
        try:
            d = encode_masked(s, vocab, template) if args.mask else encode(s, vocab, template)
        except CodecError as exc:
            name = s.sent_id or f"#{k + 1}"
            raise CodecError(f"sentence {name}: {exc}") from None
        lines.append(flatten(d))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        _write_snapshot(
            out,
            {
                "command": "encode",
                "input": args.input,
                "vocab": args.vocab,
                "out": args.out,
                "mask": args.mask,
                "ablate_abs": args.ablate_abs,
                "ablate_pos": args.ablate_pos,
            },
        )
        print(f"wrote {out}: {len(lines)} lines")
    else:
        sys.stdout.write(text)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    train_path = _require(_pick(None, config, "train_path"), "train_path")
    vocab_path = _require(_pick(args.vocab, config, "vocab_path"), "vocab_path")
    out_dir = Path(_require(_pick(args.out_dir, config, "out_dir"), "out_dir"))
    seed = resolve_seed(config.get("seed"), args.seed)

    template = TemplateConfig(**config.get("template", {}))
    tc = TrainConfig(**config.get("train", {}))
    vocab = load_vocab(vocab_path)
    sentences = _read_treebank(train_path)
    if not sentences:
        raise ValueError(f"{train_path}: no sentences")
    model_config = ModelConfig(
        vocab_size=len(vocab), seed=seed, **config.get("model", {})
    )
    fallback = most_frequent_label(sentences)
    bundle = new_bundle(
        model_config,
        vocab=vocab,
        meta={"template": asdict(template), "fallback_label": fallback},
    )
    dataset = []
    for s in sentences:
        d = encode(s, vocab, template)
        dataset.append((mask(d), d))
    bundle, trace = train(bundle, dataset, vocab, tc, rng_seed=seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.sptckpt"
    save_checkpoint(bundle, str(ckpt_path))
    first_epoch = bundle.epochs_trained - len(trace) + 1
    trace_lines = [
        f"{first_epoch + i},{loss:.12g}" for i, loss in enumerate(trace)
    ]
    _write_text(out_dir / "loss_trace.csv", "\n".join(trace_lines) + "\n")
    resolved = {
        "command": "train",
        "train_path": train_path,
        "vocab_path": vocab_path,
        "out_dir": str(out_dir),
        "seed": seed,
        "template": asdict(template),
        "model": asdict(model_config),
        "train": asdict(tc),
        "fallback_label": fallback,
    }
    _write_text(
        out_dir / "resolved_config.json",
        json.dumps(resolved, indent=2, sort_keys=True) + "\n",
    )
    print(
        f"trained {len(trace)} epochs on {len(dataset)} sentences; "
        f"final loss {trace[-1]:.6f}; wrote {ckpt_path}"
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    config = _config_of(args)
    ckpt_path = _require(_pick(args.checkpoint, config, "checkpoint_path"), "checkpoint")
    vocab_path = _require(_pick(args.vocab, config, "vocab_path"), "vocab")
    input_path = _require(_pick(args.input, config, "test_path"), "input")
    vocab = load_vocab(vocab_path)
    bundle = load_checkpoint(ckpt_path, vocab)
    template = _template_from_meta(bundle.meta)
    repair = RepairPolicy(
        mode=args.repair, fallback_label=bundle.meta.get("fallback_label", "root")
    )
    gold = _read_treebank(input_path)
    results = parse_sentences(
        bundle, gold, vocab, template, repair=repair, batch_size=args.batch_size
    )
    predicted = []
    for s, r in zip(gold, results):
        tokens = tuple(
            Token(index=t.index, form=t.form, head=r.heads[i], label=r.labels[i], pos=t.pos)
            for i, t in enumerate(s.tokens)
        )
        predicted.append(Sentence(tokens=tokens, sent_id=s.sent_id, language=s.language))
    text = write_conllu(predicted)
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        _write_snapshot(
            out,
            {
                "command": "predict",
                "checkpoint": str(ckpt_path),
                "vocab": str(vocab_path),
                "input": str(input_path),
                "out": args.out,
                "repair": args.repair,
                "batch_size": args.batch_size,
            },
        )
        print(f"wrote {out}: {len(predicted)} sentences")
    else:
        sys.stdout.write(text)
    return 0


def _format_eval(report: EvalReport) -> str:
    return (
        f"UAS {report.uas:.4f}  LAS {report.las:.4f}  "
        f"tokens {report.token_count}  sentences {report.sentence_count}"
    )


def _format_buckets(report: EvalReport) -> str:
    out = [f"{'length':<8} {'sents':>6} {'tokens':>7} {'UAS':>7} {'LAS':>7}"]
    for row in report.per_length_bucket:
        out.append(
            f"{row.range_label:<8} {row.sentence_count:>6} {row.token_count:>7} "
            f"{row.uas:>7.4f} {row.las:>7.4f}"
        )
    out.append("")
    out.append(f"{'index':<8} {'tokens':>7} {'UAS':>7} {'LAS':>7}")
    for row in report.per_index_bucket:
        out.append(
            f"{row.range_label:<8} {row.index_count:>7} {row.uas:>7.4f} {row.las:>7.4f}"
        )
    return "\n".join(out)


def _score_files(args: argparse.Namespace) -> tuple[EvalReport, dict]:
    config = _config_of(args)
    exclude, punct, edges = _eval_flags(args, config)
    gold = _read_treebank(args.gold)
    pred = _pred_file_results(gold, _read_treebank(args.pred), args.pred)
    report = score(
        gold, pred, exclude_punct=exclude, punct_labels=punct, edges=edges
    )
    resolved = {
        "gold": args.gold,
        "pred": args.pred,
        "exclude_punct": exclude,
        "punct_labels": sorted(punct),
        "edges": [list(e) for e in edges],
    }
    return report, resolved


def cmd_eval(args: argparse.Namespace) -> int:
    report, resolved = _score_files(args)
    print(_format_eval(report))
    if args.json:
        out = Path(args.json)
        _write_text(out, json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
        _write_snapshot(out, {"command": "eval", **resolved})
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    report, resolved = _score_files(args)
    print(_format_eval(report))
    print()
    print(_format_buckets(report))
    if args.json:
        out = Path(args.json)
        _write_text(out, json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
        _write_snapshot(out, {"command": "analyze", **resolved})
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config_of(args)
    ckpt_path = _require(_pick(args.checkpoint, config, "checkpoint_path"), "checkpoint")
    vocab_path = _require(_pick(args.vocab, config, "vocab_path"), "vocab")
    input_path = _require(_pick(args.input, config, "test_path"), "input")
    vocab = load_vocab(vocab_path)
    bundle = load_checkpoint(ckpt_path, vocab)
    template = _template_from_meta(bundle.meta)
    sentences = _read_treebank(input_path)
    if args.limit is not None:
        sentences = sentences[: args.limit]
    report = benchmark_speed(
        bundle,
        sentences,
        vocab,
        template,
        batch_size=args.batch_size,
        threads=args.threads_inner,
    )
    print(
        f"{report.sentences_per_second:.2f} sentences/sec "
        f"({report.total_sentences} sentences in {report.wall_seconds:.3f}s, "
        f"batch size {report.batch_size}, threads {report.threads})"
    )
    if args.json:
        out = Path(args.json)
        _write_text(out, json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
        _write_snapshot(
            out,
            {
                "command": "bench",
                "checkpoint": str(ckpt_path),
                "vocab": str(vocab_path),
                "input": str(input_path),
                "batch_size": args.batch_size,
                "threads": args.threads_inner,
                "limit": args.limit,
            },
        )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sptparse",
        description="Dependency parsing via prompt-templated sequences.",
    )
    parser.add_argument(
        "--threads", type=int, default=1, help="torch CPU thread cap (default 1)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_vocab = sub.add_parser("vocab", help="build or unify vocabularies")
    vocab_sub = p_vocab.add_subparsers(dest="action", required=True)
    p_build = vocab_sub.add_parser("build", help="collect a vocabulary from treebanks")
    p_build.add_argument("inputs", nargs="+", metavar="CONLLU")
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--max-index", type=int, default=128)
    p_build.add_argument("--min-word-freq", type=int, default=1)
    p_build.add_argument("--no-pos", action="store_true", help="skip POS prompts")
    p_build.set_defaults(func=cmd_vocab)
    p_unify = vocab_sub.add_parser("unify", help="merge vocabulary files")
    p_unify.add_argument("inputs", nargs="+", metavar="VOCAB")
    p_unify.add_argument("--out", required=True)
    p_unify.set_defaults(func=cmd_vocab)

    p_encode = sub.add_parser("encode", help="treebank to flat template lines")
    p_encode.add_argument("input", metavar="CONLLU")
    p_encode.add_argument("--vocab", required=True)
    p_encode.add_argument("--out")
    p_encode.add_argument("--mask", action="store_true", help="emit masked templates")
    p_encode.add_argument("--ablate-abs", action="store_true")
    p_encode.add_argument("--ablate-pos", action="store_true")
    p_encode.set_defaults(func=cmd_encode)

    p_train = sub.add_parser("train", help="train a model from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--vocab", help="override config vocab_path")
    p_train.add_argument("--out-dir", help="override config out_dir")
    p_train.add_argument("--seed", type=int)
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="parse a treebank with a checkpoint")
    p_predict.add_argument("--checkpoint")
    p_predict.add_argument("--vocab")
    p_predict.add_argument("--input")
    p_predict.add_argument("--config")
    p_predict.add_argument("--out")
    p_predict.add_argument("--repair", choices=("to_root", "strict"), default="to_root")
    p_predict.add_argument("--batch-size", type=int, default=32)
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="UAS/LAS of predictions vs gold")
    p_analyze = sub.add_parser("analyze", help="bucket breakdowns of predictions vs gold")
    for p in (p_eval, p_analyze):
        p.add_argument("--gold", required=True)
        p.add_argument("--pred", required=True)
        p.add_argument("--config")
        p.add_argument("--exclude-punct", action="store_true")
        p.add_argument("--punct-labels", help="comma-separated gold labels to skip")
        p.add_argument("--edges", help="bucket edges like '1-10,11-20'")
        p.add_argument("--json", help="write the full report here")
    p_eval.set_defaults(func=cmd_eval)
    p_analyze.set_defaults(func=cmd_analyze)

    p_bench = sub.add_parser("bench", help="sentences/sec of the parse pipeline")
    p_bench.add_argument("--checkpoint")
    p_bench.add_argument("--vocab")
    p_bench.add_argument("--input")
    p_bench.add_argument("--config")
    p_bench.add_argument("--batch-size", type=int, default=1)
    p_bench.add_argument(
        "--threads-inner",
        type=int,
        default=1,
        help="torch threads during the timed run (default 1 for comparability)",
    )
    p_bench.add_argument("--limit", type=int)
    p_bench.add_argument("--json", help="write the speed report here")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    torch.set_num_threads(max(1, args.threads))
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 3
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a runtime failure, not usage
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
