"""Memorization probe: drive masked-slot accuracy to 100% on a tiny corpus.

Trains an encoder on a handful of grammar-sampled sentences in chunks and
prints the accuracy trajectory after each chunk. A healthy implementation
reaches perfect masked-slot accuracy well within the epoch budget; anything
less points at a bug in encoding, masking, batching, or the loss.

Example:
    python scripts/run_overfit.py --language en --count 50
"""

from __future__ import annotations

import argparse
import time

import torch

from sptparse import (
    ModelConfig,
    TemplateConfig,
    TrainConfig,
    build_vocab,
    encode,
    generate_corpus,
    mask,
    masked_slot_accuracy,
    new_bundle,
    train,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--language", default="en")
    parser.add_argument("--count", type=int, default=50, help="corpus size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--model-dim", type=int, default=128)
    parser.add_argument("--ff-dim", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--chunk", type=int, default=20, help="epochs between accuracy checks")
    parser.add_argument("--max-epochs", type=int, default=300)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    torch.set_num_threads(args.threads)
    sents = generate_corpus(args.language, args.count, seed=args.seed)
    template = TemplateConfig(use_abs=True, use_pos=True, max_index=32)
    vocab = build_vocab([sents], template)
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
    dataset = [(mask(encode(s, vocab, template)), encode(s, vocab, template)) for s in sents]

    start = time.perf_counter()
    epochs_run = 0
    while epochs_run < args.max_epochs:
        tc = TrainConfig(
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            epochs=args.chunk,
            schedule="constant",
        )
        train(bundle, dataset, vocab, tc, rng_seed=epochs_run)
        epochs_run += args.chunk
        accuracy = masked_slot_accuracy(bundle, dataset, vocab)
        print(
            f"epoch {epochs_run:4d}  masked-slot accuracy {accuracy:.4f}  "
            f"({time.perf_counter() - start:.1f}s)"
        )
        if accuracy == 1.0:
            print(f"memorized {len(sents)} sentences in {epochs_run} epochs")
            return 0
    print(f"did not reach 100% within {args.max_epochs} epochs")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
