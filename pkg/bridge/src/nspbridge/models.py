"""Encoder construction: size tiers, tokenizer, and weight sources.

Five architecture tiers (tiny through large) follow the standard
compact-through-large BERT size ladder. Weights come from one of two sources:

  seeded:<tier>      deterministic random initialization (offline-friendly;
                     the golden-file contract pins its behavior)
  local:<path|name>  a transformers checkpoint on disk or in the local cache

The tokenizer is WordPiece; when no checkpoint supplies one it is trained
from a corpus file so everything stays reproducible without downloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch
from tokenizers import Tokenizer, models as tok_models, normalizers, \
    pre_tokenizers, trainers
from transformers import BertConfig, BertForNextSentencePrediction, \
    PreTrainedTokenizerFast

# layers, hidden, heads, feed-forward width
TIERS = {
    "tiny": (2, 128, 2, 512),
    "small": (4, 512, 8, 2048),
    "medium": (8, 512, 8, 2048),
    "base": (12, 768, 12, 3072),
    "large": (24, 1024, 16, 4096),
}

SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
MAX_TOKENS = 512


class ModelLoadError(RuntimeError):
    pass


@dataclass
class BridgeConfig:
    model_source: str = "seeded:tiny"
    tokenizer_path: str | None = None     # tokenizer.json (see train_tokenizer)
    corpus_path: str | None = None        # fallback: train tokenizer from this
    vocab_size: int = 2000
    format: str = "plain"                 # plain | sep
    max_tokens: int = MAX_TOKENS
    device: str = "cpu"
    batch_size: int = 16
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def tier(self) -> str:
        if ":" in self.model_source:
            kind, _, name = self.model_source.partition(":")
            if kind == "seeded":
                return name
        return "custom"


def train_tokenizer(corpus_lines, vocab_size: int, out_path: Path | str) -> None:
    """Train a WordPiece tokenizer from raw text lines and save tokenizer.json."""
    tokenizer = Tokenizer(tok_models.WordPiece(unk_token="[UNK]"))
    tokenizer.normalizer = normalizers.BertNormalizer(lowercase=True)
    tokenizer.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    trainer = trainers.WordPieceTrainer(vocab_size=vocab_size,
                                        special_tokens=SPECIAL_TOKENS)
    tokenizer.train_from_iterator(corpus_lines, trainer)
    tokenizer.save(str(out_path))


def load_tokenizer(config: BridgeConfig) -> PreTrainedTokenizerFast:
    if config.tokenizer_path and Path(config.tokenizer_path).exists():
        backend = Tokenizer.from_file(str(config.tokenizer_path))
    elif config.corpus_path and Path(config.corpus_path).exists():
        lines = Path(config.corpus_path).read_text(encoding="utf-8").splitlines()
        backend = Tokenizer(tok_models.WordPiece(unk_token="[UNK]"))
        backend.normalizer = normalizers.BertNormalizer(lowercase=True)
        backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
        trainer = trainers.WordPieceTrainer(vocab_size=config.vocab_size,
                                            special_tokens=SPECIAL_TOKENS)
        backend.train_from_iterator(lines, trainer)
    else:
        raise ModelLoadError(
            "no tokenizer available: set tokenizer_path or corpus_path")
    return PreTrainedTokenizerFast(
        tokenizer_object=backend, pad_token="[PAD]", unk_token="[UNK]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
        model_max_length=config.max_tokens)


def build_model(config: BridgeConfig,
                tokenizer: PreTrainedTokenizerFast) -> BertForNextSentencePrediction:
    kind, _, name = config.model_source.partition(":")
    if kind == "seeded":
        if name not in TIERS:
            raise ModelLoadError(f"unknown tier {name!r}; choose from {list(TIERS)}")
        layers, hidden, heads, ff = TIERS[name]
        bert_config = BertConfig(
            vocab_size=tokenizer.vocab_size, hidden_size=hidden,
            num_hidden_layers=layers, num_attention_heads=heads,
            intermediate_size=ff, max_position_embeddings=config.max_tokens,
            pad_token_id=tokenizer.pad_token_id)
        torch.manual_seed(config.seed)
        model = BertForNextSentencePrediction(bert_config)
    elif kind == "local":
        try:
            model = BertForNextSentencePrediction.from_pretrained(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load checkpoint {name!r}: {exc}") from exc
    else:
        raise ModelLoadError(
            f"model_source must be 'seeded:<tier>' or 'local:<path>', "
            f"got {config.model_source!r}")
    model.to(config.device)
    model.eval()
    return model


def count_parameters(model) -> int:
    return sum(p.numel() for p in model.parameters())
