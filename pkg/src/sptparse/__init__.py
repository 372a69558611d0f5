"""Dependency parsing via prompt-templated sequences and a small transformer.

A treebank sentence becomes one template unit per word
(``[i][head][label][pos]word``); masking the head and label slots turns
parsing into slot filling, handled by a from-scratch encoder (masked-token
restoration) or decoder (constrained regeneration). Decoding the filled
slots yields heads and labels scored with UAS/LAS.
"""

from .codec import (
    CodecError,
    DecodeError,
    ParseResult,
    PromptedSentence,
    RepairPolicy,
    TemplateUnit,
    decode,
    encode,
    encode_masked,
    fill_slots,
    flatten,
    mask,
    most_frequent_label,
    token_strings,
    unflatten,
)
from .evaluate import (
    DEFAULT_EDGES,
    AblationRow,
    EvalError,
    EvalReport,
    IndexBucketRow,
    LengthBucketRow,
    SpeedReport,
    baseline_parse,
    benchmark_speed,
    bucket_by_index,
    bucket_by_length,
    format_ablation_table,
    parse_sentences,
    run_ablation,
    score,
)
from .model import (
    CheckpointError,
    GradCheckReport,
    ModelBundle,
    ModelConfig,
    TokenSequence,
    TokenizationError,
    TrainConfig,
    TrainingError,
    TransformerLM,
    export_attention,
    forward,
    grad_check,
    load_checkpoint,
    loss_autoregressive,
    loss_mlm,
    masked_slot_accuracy,
    new_bundle,
    predict_decoder_constrained,
    predict_encoder,
    predict_encoder_batch,
    save_checkpoint,
    tokenize,
    train,
)
from .synthetic import (
    LANGUAGES,
    generate_corpus,
    generate_multilingual,
    random_sentences,
)
from .treebank import (
    ConlluError,
    Sentence,
    Token,
    TreeReport,
    parse_conllu,
    validate_tree,
    write_conllu,
)
from .vocab import (
    PromptVocab,
    TemplateConfig,
    VocabError,
    build_vocab,
    load_vocab,
    save_vocab,
    unify_labels,
    vocab_fingerprint,
)

__version__ = "0.1.0"
