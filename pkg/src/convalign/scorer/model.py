"""From-scratch neural next-sentence scorer.

Encoder-decoder wiring: shared subword+positional embedding, one or more
transformer encoder blocks (self-attention, or cross-attention against a
global learned style bank), a shared single-layer LSTM, a single-head
cross-attention decoder matching response against context, an aggregation
LSTM, and a 2-way softmax head. Four optional sublayers (FC1, FeedForward+
AddNorm, FC2, AddNorm2) are runtime switches.

All tensors are float64 and gradients come from the local autodiff engine,
so analytic gradients can be checked against central finite differences.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..dataset import ContextResponsePair
from ..errors import ShapeMismatch
from ..tokenizer import SubwordVocab
from . import autodiff as ad

MASK_BIAS = -1e9


@dataclass(frozen=True)
class ScorerConfig:
    embedding_dim: int = 300
    vocab_size: int = 0                 # 0 means "take it from the vocab"
    max_tokens: int = 512
    encoder_heads: int = 3
    forward_expansion: int = 1
    encoder_layers: int = 2
    share_encoder_layers: bool = False
    stylebook_enabled: bool = False
    stylebook_size: int = 500
    fc1_enabled: bool = False
    ff_addnorm1_enabled: bool = True
    fc2_enabled: bool = True
    addnorm2_enabled: bool = True
    lstm_encoder_hidden: int = 1024
    lstm_agg_hidden: int = 256
    dropout: float = 0.0
    learning_rate: float = 1e-5
    batch_size: int = 32
    weight_decay: float = 0.01
    patience: int = 10
    max_epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if min(self.embedding_dim, self.encoder_heads,
               self.lstm_encoder_hidden, self.lstm_agg_hidden) < 1:
            raise ValueError("dimensions and head count must be >= 1")
        if self.embedding_dim % self.encoder_heads != 0:
            raise ValueError("embedding_dim must be divisible by encoder_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def with_vocab(self, vocab: SubwordVocab) -> "ScorerConfig":
        return ScorerConfig(**{**asdict(self), "vocab_size": vocab.vocab_size})


def best_preset(stylebook: bool, **overrides) -> ScorerConfig:
    """The tuned architecture: batch 32, lr 1e-5, 3 heads, expansion 1,
    2 encoder blocks, 1024/256 LSTM hidden sizes, no dropout, FC1 off,
    FeedForward+AddNorm on, FC2 and AddNorm2 on; style bank of 500 when
    the stylebook variant is requested."""
    return ScorerConfig(stylebook_enabled=stylebook, **overrides)


def tiny_preset(stylebook: bool = False, **overrides) -> ScorerConfig:
    """Desk-scale configuration for tests and demos."""
    defaults = dict(embedding_dim=8, encoder_heads=2, encoder_layers=1,
                    stylebook_enabled=stylebook, stylebook_size=6,
                    lstm_encoder_hidden=16, lstm_agg_hidden=16,
                    forward_expansion=1, max_tokens=64)
    defaults.update(overrides)
    return ScorerConfig(**defaults)


def _seed_for(name: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


class ModelParameters:
    """Named parameter tensors; creation order is the canonical order."""

    def __init__(self):
        self._tensors: dict = {}

    def add(self, name: str, data: np.ndarray) -> ad.Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter {name}")
        tensor = ad.parameter(data)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> ad.Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def copy(self) -> "ModelParameters":
        clone = ModelParameters()
        for name, tensor in self._tensors.items():
            clone.add(name, tensor.data.copy())
        return clone

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = None

    def assert_finite(self) -> bool:
        return all(np.isfinite(t.data).all() for t in self._tensors.values())


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _init_array(name: str, shape: tuple, shapes: Mapping, seed: int) -> np.ndarray:
    if name in ("embedding", "style.bank"):
        # The style bank is specified as N(0, 1); embeddings use the same.
        return _seed_for(name, seed).standard_normal(shape)
    if ".ln" in name:
        return np.ones(shape) if name.endswith(".g") else np.zeros(shape)
    rng = _seed_for(name, seed)
    if "_lstm" in name:
        kind = name.rsplit(".", 1)[1]
        if kind == "wx":
            hidden = shape[1] // 4
        elif kind == "wh":
            hidden = shape[0]
        else:
            hidden = shape[0] // 4
        return _uniform(rng, hidden, shape)
    if name.endswith(".w"):
        return _uniform(rng, shape[0], shape)
    fan_in = shapes[name[:-2] + ".w"][0]
    return _uniform(rng, fan_in, shape)


def init_parameters(config: ScorerConfig, vocab_size: int | None = None) -> ModelParameters:
    """Seeded fan-in initialization (style bank and embeddings are N(0,1)).

    Every tensor draws from its own name-derived stream, so two configs
    sharing a parameter name initialize it identically regardless of which
    other parameters exist — the stylebook variant differs from the plain
    self-attention one only by which attention-source tensors are allocated.
    """
    v = vocab_size or config.vocab_size
    if v < 1:
        raise ShapeMismatch("vocab_size must be set before initializing parameters")
    shapes = expected_shapes(config, v)
    params = ModelParameters()
    for name, shape in shapes.items():
        params.add(name, _init_array(name, shape, shapes, config.seed))
    return params


def expected_shapes(config: ScorerConfig, vocab_size: int) -> dict:
    d = config.embedding_dim
    shapes: dict = {"embedding": (vocab_size, d)}

    def linear(name, n_in, n_out):
        shapes[f"{name}.w"] = (n_in, n_out)
        shapes[f"{name}.b"] = (n_out,)

    n_blocks = 1 if config.share_encoder_layers else config.encoder_layers
    for layer in range(n_blocks):
        prefix = f"enc{layer}"
        linear(f"{prefix}.q", d, d)
        if not config.stylebook_enabled:
            linear(f"{prefix}.k", d, d)
            linear(f"{prefix}.v", d, d)
        if config.fc1_enabled:
            linear(f"{prefix}.fc1", d, d)
        shapes[f"{prefix}.ln1.g"] = (d,)
        shapes[f"{prefix}.ln1.b"] = (d,)
        if config.ff_addnorm1_enabled:
            inner = config.forward_expansion * d
            linear(f"{prefix}.ff1", d, inner)
            linear(f"{prefix}.ff2", inner, d)
            shapes[f"{prefix}.lnff.g"] = (d,)
            shapes[f"{prefix}.lnff.b"] = (d,)
    if config.stylebook_enabled:
        shapes["style.bank"] = (config.stylebook_size, d)
        linear("style.k", d, d)

    def lstm(name, n_in, hidden):
        shapes[f"{name}.wx"] = (n_in, 4 * hidden)
        shapes[f"{name}.wh"] = (hidden, 4 * hidden)
        shapes[f"{name}.b"] = (4 * hidden,)

    lstm("enc_lstm", d, config.lstm_encoder_hidden)
    linear("dec.q", config.lstm_encoder_hidden, d)
    linear("dec.k", config.lstm_encoder_hidden, d)
    linear("dec.v", config.lstm_encoder_hidden, d)
    if config.fc2_enabled:
        linear("dec.fc2", d, d)
    if config.addnorm2_enabled:
        shapes["dec.ln2.g"] = (d,)
        shapes["dec.ln2.b"] = (d,)
    lstm("agg_lstm", d, config.lstm_agg_hidden)
    linear("out", config.lstm_agg_hidden, 2)
    return shapes


def check_parameters(params: ModelParameters, config: ScorerConfig,
                     vocab_size: int) -> None:
    expected = expected_shapes(config, vocab_size)
    actual = {name: tensor.data.shape for name, tensor in params.items()}
    if expected != actual:
        missing = set(expected) - set(actual)
        extra = set(actual) - set(expected)
        wrong = {n for n in set(expected) & set(actual)
                 if expected[n] != actual[n]}
        raise ShapeMismatch(
            f"parameters inconsistent with config: missing={sorted(missing)} "
            f"extra={sorted(extra)} wrong_shape={sorted(wrong)}")


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    positions = np.arange(n)[:, None]
    dims = np.arange(d)[None, :]
    angle = positions / np.power(10000.0, (2 * (dims // 2)) / d)
    enc = np.where(dims % 2 == 0, np.sin(angle), np.cos(angle))
    return enc


@dataclass
class Batch:
    pair_ids: list
    ctx_ids: np.ndarray      # (B, n_c) int, padded
    ctx_mask: np.ndarray     # (B, n_c) float, 1 = real token
    resp_ids: np.ndarray
    resp_mask: np.ndarray
    labels: np.ndarray       # (B,) int, 1 = true response
    size: int = field(init=False)

    def __post_init__(self):
        self.size = len(self.pair_ids)


def encode_pair(pair: ContextResponsePair, vocab: SubwordVocab,
                max_tokens: int) -> tuple:
    """Token ids for (context, response).

    The context keeps its tail when over budget (the most recent sentences
    matter most for predicting the next one); the response keeps its head.
    """
    ctx_text = " ".join(s.text for s in pair.context)
    ctx = list(vocab.encode(ctx_text).ids)[-max_tokens:]
    resp = list(vocab.encode(pair.response.text).ids)[:max_tokens]
    return ctx, resp


def make_batch(pairs: Sequence[ContextResponsePair], vocab: SubwordVocab,
               config: ScorerConfig,
               cache: dict | None = None) -> Batch:
    encoded = []
    for pair in pairs:
        if cache is not None and pair.pair_id in cache:
            encoded.append(cache[pair.pair_id])
            continue
        enc = encode_pair(pair, vocab, config.max_tokens)
        if cache is not None:
            cache[pair.pair_id] = enc
        encoded.append(enc)

    n_c = max(len(c) for c, _ in encoded)
    n_r = max(len(r) for _, r in encoded)
    b = len(pairs)
    ctx_ids = np.full((b, n_c), vocab.pad_id, dtype=np.int64)
    resp_ids = np.full((b, n_r), vocab.pad_id, dtype=np.int64)
    ctx_mask = np.zeros((b, n_c))
    resp_mask = np.zeros((b, n_r))
    for i, (ctx, resp) in enumerate(encoded):
        ctx_ids[i, :len(ctx)] = ctx
        ctx_mask[i, :len(ctx)] = 1.0
        resp_ids[i, :len(resp)] = resp
        resp_mask[i, :len(resp)] = 1.0
    labels = np.array([1 if p.is_positive else 0 for p in pairs], dtype=np.int64)
    return Batch(pair_ids=[p.pair_id for p in pairs], ctx_ids=ctx_ids,
                 ctx_mask=ctx_mask, resp_ids=resp_ids, resp_mask=resp_mask,
                 labels=labels)


class _Dropout:
    """Inverted dropout; a no-op at rate 0 or outside training."""

    def __init__(self, rate: float, rng: np.random.Generator | None):
        self.rate = rate
        self.rng = rng

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        if self.rate <= 0.0 or self.rng is None:
            return x
        keep = (self.rng.random(x.data.shape) >= self.rate) / (1.0 - self.rate)
        return x * ad.constant(keep)


def _linear(params: ModelParameters, name: str, x: ad.Tensor) -> ad.Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


def _add_norm(x: ad.Tensor, sub: ad.Tensor, gain: ad.Tensor,
              bias: ad.Tensor) -> ad.Tensor:
    return (x + sub).layer_norm() * gain + bias


def _split_heads(x: ad.Tensor, heads: int) -> ad.Tensor:
    # (B, n, d) -> (B, H, n, d/H); also handles the unbatched bank (S, d).
    if len(x.shape) == 2:
        s, d = x.shape
        return x.reshape(s, heads, d // heads).swapaxes(0, 1)
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).swapaxes(1, 2)


def _merge_heads(x: ad.Tensor) -> ad.Tensor:
    b, h, n, dh = x.shape
    return x.swapaxes(1, 2).reshape(b, n, h * dh)


def _encoder_block(params: ModelParameters, config: ScorerConfig, layer: int,
                   x: ad.Tensor, mask: np.ndarray, drop: _Dropout) -> ad.Tensor:
    prefix = f"enc{0 if config.share_encoder_layers else layer}"
    heads = config.encoder_heads
    d = config.embedding_dim
    dh = d // heads

    q = _split_heads(_linear(params, f"{prefix}.q", x), heads)       # (B,H,n,dh)
    if config.stylebook_enabled:
        bank = params["style.bank"]
        k = _split_heads(_linear(params, "style.k", bank), heads)    # (H,S,dh)
        v = _split_heads(bank, heads)                                # (H,S,dh)
        scores = q @ k.swapaxes(-1, -2) * (1.0 / np.sqrt(dh))        # (B,H,n,S)
    else:
        k = _split_heads(_linear(params, f"{prefix}.k", x), heads)
        v = _split_heads(_linear(params, f"{prefix}.v", x), heads)
        scores = q @ k.swapaxes(-1, -2) * (1.0 / np.sqrt(dh))        # (B,H,n,n)
        bias = (1.0 - mask)[:, None, None, :] * MASK_BIAS
        scores = scores + ad.constant(bias)
    attended = _merge_heads(scores.softmax() @ v)                    # (B,n,d)
    attended = drop(attended)

    if config.fc1_enabled:
        attended = _linear(params, f"{prefix}.fc1", attended)
    x = _add_norm(x, attended, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])

    if config.ff_addnorm1_enabled:
        ff = _linear(params, f"{prefix}.ff2",
                     _linear(params, f"{prefix}.ff1", x).gelu())
        x = _add_norm(x, drop(ff), params[f"{prefix}.lnff.g"],
                      params[f"{prefix}.lnff.b"])
    return x


def _lstm(params: ModelParameters, name: str, x: ad.Tensor,
          mask: np.ndarray, hidden: int) -> tuple:
    """Single-layer LSTM over axis 1; padded steps carry state through.

    Returns (stacked hidden sequence (B, n, h), final hidden state (B, h)).
    """
    b, n, _ = x.shape
    wx, wh, bias = params[f"{name}.wx"], params[f"{name}.wh"], params[f"{name}.b"]
    h = ad.constant(np.zeros((b, hidden)))
    c = ad.constant(np.zeros((b, hidden)))
    outputs = []
    for t in range(n):
        x_t = x.slice_axis(1, t, t + 1).reshape(b, -1)
        pre = x_t @ wx + h @ wh + bias
        i = pre.slice_axis(-1, 0, hidden).sigmoid()
        f = pre.slice_axis(-1, hidden, 2 * hidden).sigmoid()
        g = pre.slice_axis(-1, 2 * hidden, 3 * hidden).tanh()
        o = pre.slice_axis(-1, 3 * hidden, 4 * hidden).sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        m = ad.constant(mask[:, t][:, None])
        keep = ad.constant(1.0 - mask[:, t][:, None])
        c = m * c_new + keep * c
        h = m * h_new + keep * h
        outputs.append(h)
    return ad.stack(outputs, axis=1), h


def forward_batch(params: ModelParameters, config: ScorerConfig, batch: Batch,
                  rng: np.random.Generator | None = None) -> ad.Tensor:
    """Logits (B, 2) for a padded batch; rng enables dropout (training)."""
    d = config.embedding_dim
    drop = _Dropout(config.dropout, rng)
    emb = params["embedding"]

    def embed(ids):
        x = emb.take_rows(ids)
        return x + ad.constant(sinusoidal_positions(ids.shape[1], d))

    ctx = embed(batch.ctx_ids)
    resp = embed(batch.resp_ids)
    for layer in range(config.encoder_layers):
        ctx = _encoder_block(params, config, layer, ctx, batch.ctx_mask, drop)
        resp = _encoder_block(params, config, layer, resp, batch.resp_mask, drop)

    h = config.lstm_encoder_hidden
    ctx_seq, _ = _lstm(params, "enc_lstm", ctx, batch.ctx_mask, h)
    resp_seq, _ = _lstm(params, "enc_lstm", resp, batch.resp_mask, h)
    ctx_seq = drop(ctx_seq)
    resp_seq = drop(resp_seq)

    # Single-head cross-attention: response queries match context keys.
    q = _linear(params, "dec.q", resp_seq)                        # (B,n_r,d)
    k = _linear(params, "dec.k", ctx_seq)                         # (B,n_c,d)
    v = _linear(params, "dec.v", ctx_seq)
    scores = q @ k.swapaxes(-1, -2) * (1.0 / np.sqrt(d))
    scores = scores + ad.constant((1.0 - batch.ctx_mask)[:, None, :] * MASK_BIAS)
    matched = scores.softmax() @ v                                # (B,n_r,d)
    if config.fc2_enabled:
        matched = _linear(params, "dec.fc2", matched)
    if config.addnorm2_enabled:
        matched = _add_norm(q, matched, params["dec.ln2.g"], params["dec.ln2.b"])
    matched = drop(matched)

    _, final = _lstm(params, "agg_lstm", matched, batch.resp_mask,
                     config.lstm_agg_hidden)
    return _linear(params, "out", final)                          # (B, 2)


def cross_entropy(logits: ad.Tensor, labels: np.ndarray) -> ad.Tensor:
    logprobs = logits.log_softmax()
    picked = logprobs.take_along_last(labels[:, None])
    return picked.mean() * -1.0


def predict_batch(params: ModelParameters, config: ScorerConfig,
                  batch: Batch) -> np.ndarray:
    logits = forward_batch(params, config, batch)
    return logits.softmax().data[:, 1]


def neural_forward(params: ModelParameters, config: ScorerConfig,
                   pair: ContextResponsePair, vocab: SubwordVocab) -> "Prediction":
    check_parameters(params, config, vocab.vocab_size)
    batch = make_batch([pair], vocab, config)
    prob = float(predict_batch(params, config, batch)[0])
    return Prediction(pair_id=pair.pair_id, probability=prob)


@dataclass(frozen=True)
class Prediction:
    pair_id: str
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


class NeuralScorer:
    """Scorer handle around (config, vocab, params)."""

    def __init__(self, config: ScorerConfig, vocab: SubwordVocab,
                 params: ModelParameters, model_id: str = "neural"):
        check_parameters(params, config, vocab.vocab_size)
        self.config = config
        self.vocab = vocab
        self.params = params
        self.model_id = model_id
        self._cache: dict = {}

    def predict_pairs(self, pairs: Sequence[ContextResponsePair],
                      batch_size: int | None = None) -> dict:
        bs = batch_size or self.config.batch_size
        out: dict = {}
        for start in range(0, len(pairs), bs):
            chunk = pairs[start: start + bs]
            batch = make_batch(chunk, self.vocab, self.config, cache=self._cache)
            probs = predict_batch(self.params, self.config, batch)
            out.update(zip(batch.pair_ids, probs.tolist()))
        return out

    def token_count(self, text: str) -> int:
        return self.vocab.token_count(text)


# -- checkpoint format ------------------------------------------------------

CHECKPOINT_MAGIC = b"CAVSCORER1\n"


def save_checkpoint(path: Path | str, params: ModelParameters,
                    config: ScorerConfig) -> None:
    """Self-describing binary: JSON header + contiguous float64 arrays.

    Written byte-deterministically (no timestamps) so identical runs produce
    identical files.
    """
    entries = []
    offset = 0
    blobs = []
    for name, tensor in params.items():
        raw = np.ascontiguousarray(tensor.data, dtype=np.float64).tobytes()
        entries.append({"name": name, "shape": list(tensor.data.shape),
                        "offset": offset, "nbytes": len(raw)})
        offset += len(raw)
        blobs.append(raw)
    header = json.dumps({"version": 1, "config": asdict(config),
                         "params": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: Path | str) -> tuple:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ShapeMismatch(f"{path}: not a scorer checkpoint")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != 1:
            raise ShapeMismatch(f"{path}: unsupported checkpoint version")
        body = fh.read()
    config = ScorerConfig(**header["config"])
    params = ModelParameters()
    for entry in header["params"]:
        raw = body[entry["offset"]: entry["offset"] + entry["nbytes"]]
        data = np.frombuffer(raw, dtype=np.float64).reshape(entry["shape"]).copy()
        params.add(entry["name"], data)
    return params, config
