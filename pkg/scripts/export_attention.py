"""Dump attention maps and hidden-state similarities for one masked sentence.

Loads a trained checkpoint, encodes and masks one sentence from a CoNLL-U
file, and writes a JSON file holding the token strings, each layer's
per-head attention matrices, and each layer's pairwise hidden-state cosine
matrix — convenient inputs for plotting how the model reads the template.

Example:
    python scripts/export_attention.py run/model.sptckpt vocab.sptvocab \
        data/en.conllu --sentence-index 0 --out attention.json
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import torch

from sptparse import (
    TemplateConfig,
    encode_masked,
    export_attention,
    load_checkpoint,
    load_vocab,
    parse_conllu,
    token_strings,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("checkpoint")
    parser.add_argument("vocab")
    parser.add_argument("treebank", help=".conllu file supplying the sentence")
    parser.add_argument("--sentence-index", type=int, default=0)
    parser.add_argument("--out", default="attention.json")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    torch.set_num_threads(args.threads)
    vocab = load_vocab(args.vocab)
    bundle = load_checkpoint(args.checkpoint, vocab)
    template_block = bundle.meta.get("template")
    if not template_block:
        print("error: checkpoint carries no template settings")
        return 2
    template = TemplateConfig(**template_block)

    sentences = parse_conllu(Path(args.treebank).read_text(encoding="utf-8"))
    if not 0 <= args.sentence_index < len(sentences):
        print(f"error: sentence index {args.sentence_index} out of range "
              f"(file has {len(sentences)} sentences)")
        return 2
    sentence = sentences[args.sentence_index]
    d_m = encode_masked(sentence, vocab, template)
    attention, cosine = export_attention(bundle, d_m, vocab)

    payload = {
        "sentence_id": sentence.sent_id,
        "tokens": token_strings(d_m),
        "attention": [layer.tolist() for layer in attention],
        "hidden_cosine": [layer.tolist() for layer in cosine],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    layers = len(attention)
    heads = attention[0].shape[0] if attention else 0
    print(f"wrote {layers} layers x {heads} heads for "
          f"{len(payload['tokens'])} tokens to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
