"""Scorer training: AdamW on cross-entropy with early stopping on
validation recall@1, plus a finite-difference gradient check used by the
test suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import ContextResponsePair
from ..errors import Diverged
from ..evalrank import candidate_sets_from_pairs, recall_at_k
from ..tokenizer import SubwordVocab
from .model import (Batch, ModelParameters, ScorerConfig, cross_entropy,
                    forward_batch, init_parameters, make_batch, predict_batch)


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params: ModelParameters, lr: float,
                 weight_decay: float = 0.01,
                 betas: tuple = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count
        for name, tensor in self.params.items():
            grad = tensor.grad
            if grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            tensor.data -= self.lr * (update + self.weight_decay * tensor.data)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_recall1: float


@dataclass
class TrainingHistory:
    records: list
    best_epoch: int
    best_recall1: float

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_recall1"]
        for rec in self.records:
            lines.append(f"{rec.epoch},{rec.train_loss!r},{rec.val_recall1!r}")
        return "\n".join(lines) + "\n"


def _val_recall1(params: ModelParameters, config: ScorerConfig,
                 vocab: SubwordVocab, val_pairs, cache) -> float:
    predictions: dict = {}
    bs = max(config.batch_size, 64)
    for start in range(0, len(val_pairs), bs):
        batch = make_batch(val_pairs[start: start + bs], vocab, config, cache)
        probs = predict_batch(params, config, batch)
        predictions.update(zip(batch.pair_ids, probs.tolist()))
    sets = candidate_sets_from_pairs(val_pairs)
    return recall_at_k(predictions, sets, 1)


def train_scorer(dataset: Sequence[ContextResponsePair], config: ScorerConfig,
                 vocab: SubwordVocab,
                 params: ModelParameters | None = None) -> tuple:
    """Minimize cross-entropy over labelled (context, response) samples.

    After each epoch the validation recall@1 is evaluated; training stops
    when it has not improved for `patience` epochs (or at max_epochs) and
    the parameters from the best validation epoch are returned together
    with the per-epoch history. Raises Diverged on a non-finite loss.
    """
    train_pairs = [p for p in dataset if p.split == "train"]
    val_pairs = [p for p in dataset if p.split == "val"]
    if not train_pairs or not val_pairs:
        raise ValueError("training needs both train and val splits with samples")

    if params is None:
        params = init_parameters(config, vocab.vocab_size)
    optimizer = AdamW(params, lr=config.learning_rate,
                      weight_decay=config.weight_decay)
    cache: dict = {}

    best_params = params.copy()
    best_recall = -1.0
    best_epoch = 0
    records: list = []
    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(
            len(train_pairs))
        dropout_rng = (np.random.default_rng([config.seed, epoch, 1])
                       if config.dropout > 0 else None)
        losses = []
        for start in range(0, len(order), config.batch_size):
            chunk = [train_pairs[i] for i in order[start: start + config.batch_size]]
            batch = make_batch(chunk, vocab, config, cache)
            params.zero_grad()
            loss = cross_entropy(
                forward_batch(params, config, batch, rng=dropout_rng),
                batch.labels)
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                raise Diverged(f"loss non-finite at epoch {epoch}")
            loss.backward()
            optimizer.step()
            if not params.assert_finite():
                raise Diverged(f"parameters non-finite at epoch {epoch}")
            losses.append(loss_value)

        recall1 = _val_recall1(params, config, vocab, val_pairs, cache)
        records.append(EpochRecord(epoch=epoch,
                                   train_loss=float(np.mean(losses)),
                                   val_recall1=recall1))
        if recall1 > best_recall:
            best_recall = recall1
            best_epoch = epoch
            best_params = params.copy()
        elif epoch - best_epoch >= config.patience:
            break

    history = TrainingHistory(records=records, best_epoch=best_epoch,
                              best_recall1=best_recall)
    return best_params, history


def batch_loss(params: ModelParameters, config: ScorerConfig,
               batch: Batch) -> float:
    loss = cross_entropy(forward_batch(params, config, batch), batch.labels)
    return float(loss.data)


def gradient_check(config: ScorerConfig, vocab: SubwordVocab,
                   pairs: Sequence[ContextResponsePair],
                   eps: float = 1e-5, max_entries: int = 40,
                   seed: int = 0) -> dict:
    """Relative error between analytic and central-difference gradients.

    For each parameter tensor, up to max_entries seeded-random entries are
    perturbed by +-eps and the analytic gradient is compared against the
    central difference. Returns {tensor name: relative L2 error}.
    """
    if config.dropout != 0.0:
        raise ValueError("gradient check requires dropout = 0")
    params = init_parameters(config, vocab.vocab_size)
    batch = make_batch(list(pairs), vocab, config)
    params.zero_grad()
    loss = cross_entropy(forward_batch(params, config, batch), batch.labels)
    loss.backward()
    analytic = {name: (t.grad.copy() if t.grad is not None
                       else np.zeros_like(t.data))
                for name, t in params.items()}

    rng = np.random.default_rng(seed)
    errors: dict = {}
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        size = flat.size
        idx = (np.arange(size) if size <= max_entries
               else rng.choice(size, size=max_entries, replace=False))
        fd = np.empty(len(idx))
        for pos, i in enumerate(idx):
            original = flat[i]
            flat[i] = original + eps
            up = batch_loss(params, config, batch)
            flat[i] = original - eps
            down = batch_loss(params, config, batch)
            flat[i] = original
            fd[pos] = (up - down) / (2.0 * eps)
        an = analytic[name].reshape(-1)[idx]
        scale = max(float(np.linalg.norm(fd)), float(np.linalg.norm(an)))
        if scale < 1e-7:
            # Both sides negligible (e.g. key-projection biases, which cancel
            # exactly under softmax shift invariance): count as agreement
            # rather than dividing finite-difference noise by itself.
            errors[name] = 0.0
        else:
            errors[name] = float(np.linalg.norm(fd - an)) / scale
    return errors
