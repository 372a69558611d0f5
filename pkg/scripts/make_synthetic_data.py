"""Generate synthetic treebanks for experiments and demos.

Two generators are available: grammar-sampled sentences for one of the twelve
built-in language profiles (or a balanced mix of all of them), and uniformly
random trees with leftward attachments for stress testing. Output is CoNLL-U.

Examples:
    python scripts/make_synthetic_data.py data/en.conllu --language en --count 500
    python scripts/make_synthetic_data.py data/mix.conllu --language all --count 45
    python scripts/make_synthetic_data.py data/random.conllu --random-trees --count 1000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from sptparse import (
    generate_corpus,
    generate_multilingual,
    random_sentences,
    write_conllu,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("out", help="output .conllu path")
    parser.add_argument(
        "--language",
        default="en",
        help="language profile, or 'all' for a balanced multilingual mix",
    )
    parser.add_argument(
        "--count",
        type=int,
        default=100,
        help="number of sentences (per language when --language all)",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--random-trees",
        action="store_true",
        help="sample uniformly random trees instead of grammar sentences",
    )
    parser.add_argument("--min-len", type=int, default=1, help="random-tree minimum words")
    parser.add_argument("--max-len", type=int, default=50, help="random-tree maximum words")
    args = parser.parse_args(argv)

    if args.random_trees:
        sents = random_sentences(
            args.count, seed=args.seed, min_len=args.min_len, max_len=args.max_len
        )
    elif args.language == "all":
        sents = generate_multilingual(args.count, seed=args.seed)
    else:
        sents = generate_corpus(args.language, args.count, seed=args.seed)

    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_conllu(sents), encoding="utf-8")
    print(f"wrote {len(sents)} sentences to {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
