"""Held-out accuracy of a trained parser against trivial attachment baselines.

Splits a grammar-sampled corpus into train/test, fits an encoder, and prints
UAS/LAS for the model next to the attach-to-previous-word and attach-to-root
baselines on the same test set.

Example:
    python scripts/run_generalization.py --language en --train-count 1000 --test-count 100
"""

from __future__ import annotations

import argparse
import time

import torch

from sptparse import (
    ModelConfig,
    TemplateConfig,
    TrainConfig,
    baseline_parse,
    build_vocab,
    encode,
    generate_corpus,
    mask,
    new_bundle,
    parse_sentences,
    score,
    train,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--language", default="en")
    parser.add_argument("--train-count", type=int, default=1000)
    parser.add_argument("--test-count", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--model-dim", type=int, default=64)
    parser.add_argument("--ff-dim", type=int, default=128)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    torch.set_num_threads(args.threads)
    total = args.train_count + args.test_count
    sents = generate_corpus(args.language, total, seed=args.seed)
    train_sents, test_sents = sents[: args.train_count], sents[args.train_count :]
    template = TemplateConfig(use_abs=True, use_pos=True, max_index=32)
    vocab = build_vocab([train_sents], template)
    dataset = [
        (mask(encode(s, vocab, template)), encode(s, vocab, template)) for s in train_sents
    ]
    config = ModelConfig(
        vocab_size=len(vocab),
        arch="encoder",
        layers=args.layers,
        heads=args.heads,
        model_dim=args.model_dim,
        ff_dim=args.ff_dim,
        max_positions=128,
        dropout=0.0,
        seed=args.seed,
    )
    bundle = new_bundle(config, vocab)
    tc = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        schedule="linear_decay",
        total_epochs=args.epochs,
    )
    start = time.perf_counter()
    train(bundle, dataset, vocab, tc, rng_seed=args.seed)
    wall = time.perf_counter() - start

    rows = [("model", score(test_sents, parse_sentences(bundle, test_sents, vocab, template)))]
    for mode in ("previous", "root"):
        rows.append((f"attach-{mode}", score(test_sents, baseline_parse(test_sents, mode))))

    print(f"{args.language}: {len(train_sents)} train / {len(test_sents)} test, "
          f"{args.epochs} epochs in {wall:.1f}s")
    print(f"{'system':<16}{'UAS':>8}{'LAS':>8}")
    for name, report in rows:
        print(f"{name:<16}{report.uas:>8.4f}{report.las:>8.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
