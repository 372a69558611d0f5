"""Template ablation: retrain with prompt components removed and compare.

Trains the full template plus the requested ablated variants (dropping the
absolute-index prompts, dropping the part-of-speech prompts) on the same
split and prints the UAS/LAS delta table.

Example:
    python scripts/run_ablation.py --language de --train-count 300 --test-count 120
"""

from __future__ import annotations

import argparse
import time

import torch

from sptparse import (
    ModelConfig,
    TemplateConfig,
    TrainConfig,
    format_ablation_table,
    generate_corpus,
    run_ablation,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--language", default="de")
    parser.add_argument("--train-count", type=int, default=300)
    parser.add_argument("--test-count", type=int, default=120)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--layers", type=int, default=1)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--model-dim", type=int, default=64)
    parser.add_argument("--ff-dim", type=int, default=128)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument(
        "--variants",
        default="no_abs,no_pos",
        help="comma-separated template variants to retrain",
    )
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    torch.set_num_threads(args.threads)
    total = args.train_count + args.test_count
    sents = generate_corpus(args.language, total, seed=args.seed)
    train_sents, test_sents = sents[: args.train_count], sents[args.train_count :]
    template = TemplateConfig(use_abs=True, use_pos=True, max_index=32)
    model_config = ModelConfig(
        vocab_size=1,  # resized per variant vocabulary
        arch="encoder",
        layers=args.layers,
        heads=args.heads,
        model_dim=args.model_dim,
        ff_dim=args.ff_dim,
        max_positions=128,
        dropout=0.0,
        seed=args.seed,
    )
    tc = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        schedule="linear_decay",
        total_epochs=args.epochs,
    )
    start = time.perf_counter()
    rows = run_ablation(
        train_sents,
        test_sents,
        template,
        model_config,
        tc,
        variants=tuple(v for v in args.variants.split(",") if v),
        seed=args.seed,
    )
    print(f"{args.language}: {len(train_sents)} train / {len(test_sents)} test, "
          f"{args.epochs} epochs per variant, {time.perf_counter() - start:.1f}s total")
    print(format_ablation_table(rows))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
