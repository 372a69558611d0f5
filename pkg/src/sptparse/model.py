"""A small from-scratch transformer over the prompt-template vocabulary.

Two modes share one implementation: "encoder" attends bidirectionally and is
trained to restore masked head/label slots in place; "decoder" applies a
strict causal mask and is trained to regenerate the filled template after the
masked template prefix. Everything is CPU float32 and fully seed-determined.
"""

from __future__ import annotations

import json
import math
import random
import struct
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .codec import PromptedSentence, token_strings
from .vocab import PromptVocab, vocab_fingerprint

CHECKPOINT_MAGIC = b"SPTCKPT1"


class TokenizationError(ValueError):
    """A prompt lexeme with no vocabulary id."""


class TrainingError(RuntimeError):
    """Divergence during optimization; carries the epoch and step."""

    def __init__(self, message: str, epoch: int, step: int):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class CheckpointError(ValueError):
    """Unreadable checkpoint file or one saved against a different vocabulary."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    arch: str = "encoder"
    layers: int = 4
    heads: int = 4
    model_dim: int = 128
    ff_dim: int = 512
    max_positions: int = 512
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.arch not in ("encoder", "decoder"):
            raise ValueError(f"arch must be 'encoder' or 'decoder', got {self.arch!r}")
        if self.layers < 1 or self.heads < 1:
            raise ValueError("layers and heads must be >= 1")
        if self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.vocab_size < 1 or self.max_positions < 1:
            raise ValueError("vocab_size and max_positions must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 3e-4
    epochs: int = 30
    schedule: str = "linear_decay"
    weight_decay: float = 0.01
    grad_clip: float | None = 1.0
    loss_scope: str = "all_positions"
    # Anchor for linear decay, in epochs since the bundle was fresh. Lets a
    # resumed run retrace the exact step sizes of an uninterrupted one.
    total_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.schedule not in ("linear_decay", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.loss_scope not in ("all_positions", "masked_only"):
            raise ValueError(f"unknown loss_scope {self.loss_scope!r}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")

    @classmethod
    def full_scale_preset(cls) -> "TrainConfig":
        """Fine-tuning values for full-size corpora: batch 8, lr 1e-5, 10 epochs, linear."""
        return cls(batch_size=8, learning_rate=1e-5, epochs=10, schedule="linear_decay")


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    mask_positions: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "mask_positions", tuple(self.mask_positions))
        if any(i < 0 for i in self.ids):
            raise ValueError("token ids must be non-negative")
        for a, b in zip(self.mask_positions, self.mask_positions[1:]):
            if b <= a:
                raise ValueError("mask_positions must be strictly increasing")
        if self.mask_positions and not (
            0 <= self.mask_positions[0] and self.mask_positions[-1] < len(self.ids)
        ):
            raise ValueError("mask_positions out of range")

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(d: PromptedSentence, vocab: PromptVocab) -> TokenSequence:
    """One id per prompt lexeme and per word; words fall back to <unk>."""
    ids: list[int] = []
    masks: list[int] = []
    for unit in d.units:
        for prompt in (unit.abs, unit.refx, unit.label, unit.pos):
            if prompt is None:
                continue
            pid = vocab.id_of(prompt)
            if pid is None:
                raise TokenizationError(f"prompt {prompt!r} is not in the vocabulary")
            if pid in (vocab.head_mask_id, vocab.dep_mask_id):
                masks.append(len(ids))
            ids.append(pid)
        ids.append(vocab.word_id(unit.word))
    return TokenSequence(ids=tuple(ids), mask_positions=tuple(masks))


class _Attention(nn.Module):
    """Multi-head self-attention with explicit score masking."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.heads = config.heads
        self.head_dim = config.model_dim // config.heads
        self.qkv = nn.Linear(config.model_dim, 3 * config.model_dim)
        self.out = nn.Linear(config.model_dim, config.model_dim)
        self.drop = nn.Dropout(config.dropout)

    def forward(
        self, x: torch.Tensor, bias: torch.Tensor | None, need_probs: bool = False
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        batch, length, dim = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        shape = (batch, length, self.heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        if bias is not None:
            scores = scores + bias
        probs = torch.softmax(scores, dim=-1)
        ctx = self.drop(probs) @ v
        ctx = ctx.transpose(1, 2).reshape(batch, length, dim)
        return self.out(ctx), (probs if need_probs else None)


class _Block(nn.Module):
    """Pre-layer-norm residual block: attention then GELU feed-forward."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.model_dim)
        self.attn = _Attention(config)
        self.ln2 = nn.LayerNorm(config.model_dim)
        self.ff = nn.Sequential(
            nn.Linear(config.model_dim, config.ff_dim),
            nn.GELU(),
            nn.Linear(config.ff_dim, config.model_dim),
        )
        self.drop = nn.Dropout(config.dropout)

    def forward(
        self, x: torch.Tensor, bias: torch.Tensor | None, need_probs: bool = False
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        attn_out, probs = self.attn(self.ln1(x), bias, need_probs)
        x = x + self.drop(attn_out)
        x = x + self.drop(self.ff(self.ln2(x)))
        return x, probs


class TransformerLM(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_embed = nn.Embedding(config.vocab_size, config.model_dim)
        self.pos_embed = nn.Embedding(config.max_positions, config.model_dim)
        self.drop = nn.Dropout(config.dropout)
        self.blocks = nn.ModuleList(_Block(config) for _ in range(config.layers))
        self.ln_f = nn.LayerNorm(config.model_dim)
        self.out_proj = nn.Linear(config.model_dim, config.vocab_size)
        self.apply(self._init)

    @staticmethod
    def _init(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def _attention_bias(
        self, ids: torch.Tensor, key_padding: torch.Tensor | None
    ) -> torch.Tensor | None:
        """Additive (batch, 1, T, T) mask: -inf at disallowed key positions."""
        batch, length = ids.shape
        bias = None
        if self.config.arch == "decoder":
            causal = torch.full((length, length), float("-inf"), dtype=torch.float32)
            causal = torch.triu(causal, diagonal=1)
            bias = causal.view(1, 1, length, length)
        if key_padding is not None and key_padding.any():
            pad = torch.zeros(batch, 1, 1, length, dtype=torch.float32)
            pad.masked_fill_(key_padding.view(batch, 1, 1, length), float("-inf"))
            bias = pad if bias is None else bias + pad
        if bias is not None and next(self.parameters()).dtype != bias.dtype:
            bias = bias.to(next(self.parameters()).dtype)
        return bias

    def forward(
        self,
        ids: torch.Tensor,
        key_padding: torch.Tensor | None = None,
        need_states: bool = False,
    ):
        """Logits (batch, T, vocab); optionally per-layer attention and hidden states."""
        batch, length = ids.shape
        if length > self.config.max_positions:
            raise ValueError(
                f"sequence length {length} exceeds max_positions {self.config.max_positions}"
            )
        positions = torch.arange(length).view(1, length).expand(batch, length)
        x = self.drop(self.tok_embed(ids) + self.pos_embed(positions))
        bias = self._attention_bias(ids, key_padding)
        attentions: list[torch.Tensor] = []
        hiddens: list[torch.Tensor] = []
        for block in self.blocks:
            x, probs = block(x, bias, need_probs=need_states)
            if need_states:
                attentions.append(probs)
                hiddens.append(x)
        logits = self.out_proj(self.ln_f(x))
        if need_states:
            return logits, attentions, hiddens
        return logits


@dataclass
class ModelBundle:
    """A model plus everything needed to keep training or reload it."""

    config: ModelConfig
    model: TransformerLM
    optimizer_state: dict | None = None
    epochs_trained: int = 0
    vocab_sha256: str | None = None
    meta: dict = field(default_factory=dict)


def new_bundle(
    config: ModelConfig, vocab: PromptVocab | None = None, meta: dict | None = None
) -> ModelBundle:
    torch.manual_seed(config.seed)
    model = TransformerLM(config)
    return ModelBundle(
        config=config,
        model=model,
        vocab_sha256=vocab_fingerprint(vocab) if vocab is not None else None,
        meta=dict(meta or {}),
    )


def _check_ids(ids: Sequence[int], config: ModelConfig) -> None:
    if any(i >= config.vocab_size for i in ids):
        raise ValueError("token id out of range for this model's vocabulary")


def forward(bundle: ModelBundle, ids: Sequence[int]) -> torch.Tensor:
    """Inference logits for one sequence: (len(ids), vocab_size), dropout off."""
    _check_ids(ids, bundle.config)
    bundle.model.eval()
    with torch.no_grad():
        logits = bundle.model(torch.tensor([list(ids)], dtype=torch.long))
    return logits[0]


def _nll(
    logits: torch.Tensor, targets: torch.Tensor, keep: torch.Tensor
) -> tuple[torch.Tensor, int]:
    """Sum of double-precision NLLs at kept positions, plus the kept count."""
    logp = F.log_softmax(logits.double(), dim=-1)
    picked = logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    return -(picked * keep.double()).sum(), int(keep.sum().item())


def loss_mlm(
    bundle: ModelBundle,
    x: TokenSequence,
    y: TokenSequence,
    scope: str = "all_positions",
) -> torch.Tensor:
    """Mean NLL of y under the model read of x; scope picks the positions."""
    if len(x) != len(y):
        raise ValueError(f"input and target lengths differ: {len(x)} vs {len(y)}")
    if scope not in ("all_positions", "masked_only"):
        raise ValueError(f"unknown loss scope {scope!r}")
    if len(x) == 0:
        raise ValueError("cannot score an empty sequence")
    _check_ids(x.ids, bundle.config)
    _check_ids(y.ids, bundle.config)
    logits = bundle.model(torch.tensor([list(x.ids)], dtype=torch.long))[0]
    keep = torch.ones(len(x), dtype=torch.bool)
    if scope == "masked_only":
        if not x.mask_positions:
            raise ValueError("masked_only scope needs at least one mask position")
        keep = torch.zeros(len(x), dtype=torch.bool)
        keep[list(x.mask_positions)] = True
    total, count = _nll(logits, torch.tensor(list(y.ids)), keep)
    return total / count


def loss_autoregressive(bundle: ModelBundle, x: TokenSequence, y: TokenSequence) -> torch.Tensor:
    """Mean NLL of each y token given x plus the already-generated y prefix."""
    if bundle.config.arch != "decoder":
        raise ValueError("autoregressive loss needs a decoder-mode bundle")
    if len(x) == 0 or len(y) == 0:
        raise ValueError("prefix and target must be non-empty")
    _check_ids(x.ids, bundle.config)
    _check_ids(y.ids, bundle.config)
    seq = list(x.ids) + list(y.ids)
    logits = bundle.model(torch.tensor([seq], dtype=torch.long))[0]
    # Position len(x)-1+k holds the distribution for y[k].
    rows = logits[len(x) - 1 : len(seq) - 1]
    total, count = _nll(rows, torch.tensor(list(y.ids)), torch.ones(len(y), dtype=torch.bool))
    return total / count


def mix_seed(seed: int, epoch: int) -> int:
    """Stable per-epoch seed so shuffles and dropout align across resumes."""
    return (seed * 1_000_003 + epoch * 7_919 + 97) % (2**31 - 1)


def _pad_batch(seqs: list[list[int]], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    padding = torch.ones(len(seqs), width, dtype=torch.bool)
    for row, seq in enumerate(seqs):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        padding[row, : len(seq)] = False
    return ids, padding


def _batch_loss_encoder(
    model: TransformerLM,
    batch: list[tuple[TokenSequence, TokenSequence]],
    pad_id: int,
    scope: str,
) -> tuple[torch.Tensor, int]:
    ids, padding = _pad_batch([list(x.ids) for x, _ in batch], pad_id)
    targets, _ = _pad_batch([list(y.ids) for _, y in batch], pad_id)
    keep = torch.zeros_like(padding)
    for row, (x, _) in enumerate(batch):
        if scope == "all_positions":
            keep[row, : len(x)] = True
        else:
            keep[row, list(x.mask_positions)] = True
    logits = model(ids, key_padding=padding)
    return _nll(logits, targets, keep)


def _batch_loss_decoder(
    model: TransformerLM,
    batch: list[tuple[TokenSequence, TokenSequence]],
    pad_id: int,
) -> tuple[torch.Tensor, int]:
    seqs = [list(x.ids) + list(y.ids) for x, y in batch]
    ids, padding = _pad_batch(seqs, pad_id)
    targets = torch.roll(ids, shifts=-1, dims=1)
    keep = torch.zeros_like(padding)
    for row, (x, y) in enumerate(batch):
        keep[row, len(x) - 1 : len(x) + len(y) - 1] = True
    logits = model(ids, key_padding=padding)
    return _nll(logits, targets, keep)


def _prepare_pairs(
    dataset: Sequence[tuple[PromptedSentence, PromptedSentence]],
    vocab: PromptVocab,
    config: ModelConfig,
) -> list[tuple[TokenSequence, TokenSequence]]:
    pairs = []
    for k, (d_m, d) in enumerate(dataset):
        if not d_m.masked or d.masked:
            raise ValueError(f"dataset pair {k} must be (masked, filled)")
        x, y = tokenize(d_m, vocab), tokenize(d, vocab)
        if len(x) != len(y):
            raise ValueError(f"dataset pair {k} tokenizes to unequal lengths")
        _check_ids(x.ids, config)
        _check_ids(y.ids, config)
        need = len(x) if config.arch == "encoder" else len(x) + len(y)
        if need > config.max_positions:
            raise ValueError(
                f"dataset pair {k} needs {need} positions, model allows {config.max_positions}"
            )
        pairs.append((x, y))
    return pairs


def train(
    bundle: ModelBundle,
    dataset: Sequence[tuple[PromptedSentence, PromptedSentence]],
    vocab: PromptVocab,
    tc: TrainConfig,
    rng_seed: int = 0,
) -> tuple[ModelBundle, list[float]]:
    """Optimize the bundle in place; returns it with a per-epoch loss trace.

    The trace entry for an epoch is the token-weighted mean NLL over the
    epoch's batches. Shuffling, dropout and the decay schedule are functions
    of (rng_seed, absolute epoch), so a run interrupted after any epoch and
    resumed with the same arguments retraces the uninterrupted run exactly.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    pairs = _prepare_pairs(dataset, vocab, bundle.config)
    model = bundle.model
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=tc.learning_rate, weight_decay=tc.weight_decay
    )
    if bundle.optimizer_state is not None:
        optimizer.load_state_dict(bundle.optimizer_state)
    for group in optimizer.param_groups:
        group["weight_decay"] = tc.weight_decay

    steps_per_epoch = math.ceil(len(pairs) / tc.batch_size)
    start_epoch = bundle.epochs_trained
    anchor_epochs = tc.total_epochs if tc.total_epochs is not None else start_epoch + tc.epochs
    if anchor_epochs < start_epoch + tc.epochs:
        raise ValueError("total_epochs is smaller than the epochs already planned")
    total_steps = anchor_epochs * steps_per_epoch

    pad_id = vocab.pad_id
    trace: list[float] = []
    for local_epoch in range(tc.epochs):
        epoch = start_epoch + local_epoch
        epoch_seed = mix_seed(rng_seed, epoch)
        torch.manual_seed(epoch_seed)
        order = list(range(len(pairs)))
        random.Random(epoch_seed).shuffle(order)
        model.train()
        epoch_nll = 0.0
        epoch_tokens = 0
        for step in range(steps_per_epoch):
            chunk = order[step * tc.batch_size : (step + 1) * tc.batch_size]
            batch = [pairs[i] for i in chunk]
            if tc.schedule == "linear_decay":
                t = epoch * steps_per_epoch + step
                lr = tc.learning_rate * max(0.0, 1.0 - t / total_steps)
            else:
                lr = tc.learning_rate
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            if bundle.config.arch == "encoder":
                total, count = _batch_loss_encoder(model, batch, pad_id, tc.loss_scope)
            else:
                total, count = _batch_loss_decoder(model, batch, pad_id)
            loss = total / count
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {step}", epoch=epoch, step=step
                )
            loss.backward()
            if tc.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), tc.grad_clip)
            optimizer.step()
            epoch_nll += float(total.item())
            epoch_tokens += count
        trace.append(epoch_nll / epoch_tokens)
    model.eval()
    bundle.optimizer_state = optimizer.state_dict()
    bundle.epochs_trained = start_epoch + tc.epochs
    return bundle, trace


def _slot_candidates(
    position_id: int, n: int, vocab: PromptVocab, restricted: bool
) -> list[int] | None:
    """Candidate output ids for a mask slot; None means the full vocabulary."""
    if not restricted:
        return None
    if position_id == vocab.head_mask_id:
        return vocab.index_ids(n)
    return vocab.label_ids()


def _argmax_over(logits_row: torch.Tensor, candidates: list[int] | None) -> int:
    if candidates is None:
        return int(logits_row.argmax().item())
    sub = logits_row[torch.tensor(candidates, dtype=torch.long)]
    return candidates[int(sub.argmax().item())]


def predict_encoder(
    bundle: ModelBundle,
    d_m: PromptedSentence,
    vocab: PromptVocab,
    restricted: bool = True,
) -> list[str]:
    """Fill every [HEAD]/[DEP] slot with one bidirectional pass."""
    return predict_encoder_batch(bundle, [d_m], vocab, restricted=restricted)[0]


def predict_encoder_batch(
    bundle: ModelBundle,
    sentences: Sequence[PromptedSentence],
    vocab: PromptVocab,
    restricted: bool = True,
    batch_size: int = 32,
) -> list[list[str]]:
    if bundle.config.arch != "encoder":
        raise ValueError("predict_encoder needs an encoder-mode bundle")
    out: list[list[str]] = []
    model = bundle.model
    model.eval()
    for start in range(0, len(sentences), batch_size):
        group = sentences[start : start + batch_size]
        toks = []
        for d_m in group:
            if not d_m.masked:
                raise ValueError("predict_encoder expects a masked template")
            x = tokenize(d_m, vocab)
            _check_ids(x.ids, bundle.config)
            if len(x) > bundle.config.max_positions:
                raise ValueError(
                    f"sequence length {len(x)} exceeds max_positions "
                    f"{bundle.config.max_positions}"
                )
            toks.append(x)
        ids, padding = _pad_batch([list(x.ids) for x in toks], vocab.pad_id)
        with torch.no_grad():
            logits = model(ids, key_padding=padding)
        for row, (d_m, x) in enumerate(zip(group, toks)):
            strings = token_strings(d_m)
            for pos in x.mask_positions:
                cands = _slot_candidates(x.ids[pos], d_m.n, vocab, restricted)
                strings[pos] = vocab.token_of(_argmax_over(logits[row, pos], cands))
            out.append(strings)
    return out


def predict_decoder_constrained(
    bundle: ModelBundle, d_m: PromptedSentence, vocab: PromptVocab
) -> list[str]:
    """Regenerate the filled template after the masked prefix.

    Scaffold positions (absolute-index, POS, word) are forced to the input's
    tokens; only [HEAD]/[DEP] slots consult the model, restricted to legal
    prompts. The model therefore runs only at slot positions.
    """
    if bundle.config.arch != "decoder":
        raise ValueError("constrained generation needs a decoder-mode bundle")
    if not d_m.masked:
        raise ValueError("constrained generation expects a masked template")
    x = tokenize(d_m, vocab)
    _check_ids(x.ids, bundle.config)
    if 2 * len(x) > bundle.config.max_positions:
        raise ValueError(
            f"prefix plus generation needs {2 * len(x)} positions, model allows "
            f"{bundle.config.max_positions}"
        )
    model = bundle.model
    model.eval()
    strings = token_strings(d_m)
    slots = set(x.mask_positions)
    seq = list(x.ids)
    for j in range(len(x)):
        if j not in slots:
            seq.append(x.ids[j])
            continue
        with torch.no_grad():
            logits = model(torch.tensor([seq], dtype=torch.long))[0, -1]
        cands = _slot_candidates(x.ids[j], d_m.n, vocab, restricted=True)
        chosen = _argmax_over(logits, cands)
        seq.append(chosen)
        strings[j] = vocab.token_of(chosen)
    if len(seq) != 2 * len(x):
        raise AssertionError("generated length diverged from the forced scaffold")
    return strings


def masked_slot_accuracy(
    bundle: ModelBundle,
    dataset: Sequence[tuple[PromptedSentence, PromptedSentence]],
    vocab: PromptVocab,
) -> float:
    """Fraction of [HEAD]/[DEP] slots the model restores to the gold token."""
    if not dataset:
        raise ValueError("empty dataset")
    total = 0
    hit = 0
    masked = [d_m for d_m, _ in dataset]
    if bundle.config.arch == "encoder":
        filled = predict_encoder_batch(bundle, masked, vocab)
    else:
        filled = [predict_decoder_constrained(bundle, d_m, vocab) for d_m in masked]
    for (d_m, d), pred in zip(dataset, filled):
        gold = token_strings(d)
        for pos in tokenize(d_m, vocab).mask_positions:
            total += 1
            hit += int(pred[pos] == gold[pos])
    return hit / total


# ---------------------------------------------------------------------------
# Gradient checking


@dataclass(frozen=True)
class GradCheckReport:
    loss_name: str
    per_tensor: dict[str, float]
    tolerance: float

    @property
    def max_rel_err(self) -> float:
        return max(self.per_tensor.values())

    @property
    def failing_tensors(self) -> tuple[str, ...]:
        return tuple(n for n, e in sorted(self.per_tensor.items()) if e >= self.tolerance)

    @property
    def passed(self) -> bool:
        return not self.failing_tensors


def _grad_check_one(
    model: TransformerLM,
    loss_fn,
    loss_name: str,
    tolerance: float,
    step: float,
    mutate: str | None,
) -> GradCheckReport:
    model.eval()
    model.zero_grad(set_to_none=True)
    loss_fn().backward()
    analytic = {
        name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
        for name, p in model.named_parameters()
    }
    if mutate is not None:
        if mutate not in analytic:
            raise ValueError(f"no parameter named {mutate!r}")
        analytic[mutate] = -analytic[mutate]
    per_tensor: dict[str, float] = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            flat = p.view(-1)
            worst = 0.0
            for i in range(flat.numel()):
                keep = flat[i].item()
                flat[i] = keep + step
                plus = float(loss_fn().item())
                flat[i] = keep - step
                minus = float(loss_fn().item())
                flat[i] = keep
                numeric = (plus - minus) / (2.0 * step)
                a = float(analytic[name].view(-1)[i].item())
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, rel)
            per_tensor[name] = worst
    return GradCheckReport(loss_name=loss_name, per_tensor=per_tensor, tolerance=tolerance)


def grad_check(
    config: ModelConfig | None = None,
    tolerance: float = 1e-3,
    step: float = 1e-4,
    mutate: str | None = None,
    seed: int = 0,
) -> list[GradCheckReport]:
    """Compare analytic gradients of both losses against central differences.

    Runs in float64 at desk dimensions. `mutate` flips the sign of one named
    parameter's analytic gradient first, to prove the comparison can fail.
    """
    base = config or ModelConfig(
        vocab_size=24,
        layers=2,
        heads=2,
        model_dim=8,
        ff_dim=16,
        max_positions=32,
        dropout=0.0,
        seed=seed,
    )
    if base.model_dim > 16 or base.layers > 2 or base.vocab_size > 40:
        raise ValueError("grad_check runs at desk dims: model_dim <= 16, layers <= 2, vocab <= 40")
    rng = random.Random(seed)
    length = 6
    x = TokenSequence(tuple(rng.randrange(base.vocab_size) for _ in range(length)), (1, 4))
    y = TokenSequence(tuple(rng.randrange(base.vocab_size) for _ in range(length)))
    reports = []

    enc = new_bundle(ModelConfig(**{**asdict(base), "arch": "encoder"}))
    enc.model.double()
    reports.append(
        _grad_check_one(
            enc.model,
            lambda: loss_mlm(enc, x, y, scope="all_positions"),
            "mlm",
            tolerance,
            step,
            mutate,
        )
    )
    dec = new_bundle(ModelConfig(**{**asdict(base), "arch": "decoder"}))
    dec.model.double()
    reports.append(
        _grad_check_one(
            dec.model,
            lambda: loss_autoregressive(dec, x, y),
            "autoregressive",
            tolerance,
            step,
            mutate,
        )
    )
    return reports


# ---------------------------------------------------------------------------
# Attention export


def export_attention(
    bundle: ModelBundle, d_m: PromptedSentence, vocab: PromptVocab
) -> tuple[list["torch.Tensor"], list["torch.Tensor"]]:
    """Per-layer (heads, T, T) attention maps and (T, T) hidden-state cosines."""
    if bundle.config.arch != "encoder":
        raise ValueError("attention export needs an encoder-mode bundle")
    x = tokenize(d_m, vocab)
    _check_ids(x.ids, bundle.config)
    bundle.model.eval()
    with torch.no_grad():
        _, attentions, hiddens = bundle.model(
            torch.tensor([list(x.ids)], dtype=torch.long), need_states=True
        )
    attn_out = [a[0].detach() for a in attentions]
    cos_out = []
    for h in hiddens:
        states = h[0].detach()
        unit = states / states.norm(dim=-1, keepdim=True).clamp_min(1e-12)
        cos_out.append(unit @ unit.T)
    return attn_out, cos_out


# ---------------------------------------------------------------------------
# Checkpointing


def _tensor_blob(t: torch.Tensor) -> bytes:
    return t.detach().to(torch.float32).contiguous().numpy().tobytes()


def save_checkpoint(bundle: ModelBundle, path: str) -> None:
    """Versioned container: JSON header plus named little-endian f32 blobs."""
    tensors: list[tuple[str, torch.Tensor]] = sorted(bundle.model.state_dict().items())
    opt_header = None
    if bundle.optimizer_state is not None:
        state = bundle.optimizer_state
        steps = {}
        for idx, entry in state["state"].items():
            steps[str(idx)] = int(entry["step"].item() if torch.is_tensor(entry["step"]) else entry["step"])
            tensors.append((f"opt.{idx}.exp_avg", entry["exp_avg"]))
            tensors.append((f"opt.{idx}.exp_avg_sq", entry["exp_avg_sq"]))
        groups = [{k: v for k, v in g.items() if k != "params"} for g in state["param_groups"]]
        opt_header = {"steps": steps, "param_groups": groups}
    header = {
        "format": "sptckpt",
        "version": 1,
        "model_config": asdict(bundle.config),
        "vocab_sha256": bundle.vocab_sha256,
        "epochs_trained": bundle.epochs_trained,
        "meta": bundle.meta,
        "optimizer": opt_header,
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in tensors:
            fh.write(_tensor_blob(t))


def load_checkpoint(path: str, vocab: PromptVocab | None = None) -> ModelBundle:
    """Rebuild a bundle; refuses to pair with a vocabulary it was not saved for."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header: {exc}") from None
        if header.get("format") != "sptckpt" or header.get("version") != 1:
            raise CheckpointError(f"{path}: unsupported checkpoint version")
        if vocab is not None:
            saved_hash = header.get("vocab_sha256")
            if saved_hash is None:
                raise CheckpointError(f"{path}: checkpoint carries no vocabulary hash")
            if saved_hash != vocab_fingerprint(vocab):
                raise CheckpointError(
                    f"{path}: checkpoint was saved for a different vocabulary "
                    f"(hash {saved_hash[:12]}..., got {vocab_fingerprint(vocab)[:12]}...)"
                )
        loaded: dict[str, torch.Tensor] = {}
        for rec in header["tensors"]:
            shape = tuple(rec["shape"])
            numel = math.prod(shape) if shape else 1
            raw = fh.read(4 * numel)
            if len(raw) != 4 * numel:
                raise CheckpointError(f"{path}: truncated tensor {rec['name']!r}")
            t = torch.frombuffer(bytearray(raw), dtype=torch.float32).clone()
            loaded[rec["name"]] = t.view(shape)
    config = ModelConfig(**header["model_config"])
    bundle = new_bundle(config)
    model_state = {n: t for n, t in loaded.items() if not n.startswith("opt.")}
    bundle.model.load_state_dict(model_state)
    bundle.model.eval()
    bundle.epochs_trained = int(header["epochs_trained"])
    bundle.vocab_sha256 = header["vocab_sha256"]
    bundle.meta = dict(header.get("meta") or {})
    if header.get("optimizer") is not None:
        opt = header["optimizer"]
        state: dict[int, dict] = {}
        for key, step in opt["steps"].items():
            idx = int(key)
            state[idx] = {
                "step": torch.tensor(float(step)),
                "exp_avg": loaded[f"opt.{idx}.exp_avg"],
                "exp_avg_sq": loaded[f"opt.{idx}.exp_avg_sq"],
            }
        params = list(range(sum(1 for _ in bundle.model.parameters())))
        groups = [dict(g) for g in opt["param_groups"]]
        groups[0]["params"] = params
        for g in groups[1:]:
            g["params"] = []
        bundle.optimizer_state = {"state": state, "param_groups": groups}
    return bundle
