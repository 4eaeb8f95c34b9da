"""Fine-tuning on the binary next-sentence objective.

Consumes the dataset JSONL emitted by the pipeline (one labelled sample per
line with a 5-sentence context) and sweeps a configurable grid of batch
sizes, learning rates and epoch counts, reporting validation recall@1 per
cell. All encoder and head parameters are updated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.optim import AdamW

from .models import BridgeConfig, build_model, load_tokenizer
from .scoring import build_token_ids, score_requests

DEFAULT_GRID = {"batch_sizes": (16, 32), "learning_rates": (2e-5, 3e-5),
                "epochs": (2,)}


def read_dataset(path: Path | str) -> list:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(json.loads(line))
    return samples


def context_key(pair_id: str) -> str:
    parts = pair_id.split(":")
    return ":".join(parts[:2])


def recall_at_1(model, tokenizer, config: BridgeConfig, samples) -> float:
    requests = [{"pair_id": s["pair_id"], "context": s["context"],
                 "response": s["response"], "format": config.format}
                for s in samples]
    probs = score_requests(model, tokenizer, config, requests)
    by_context: dict = {}
    for sample, prob in zip(samples, probs):
        by_context.setdefault(context_key(sample["pair_id"]), []).append(
            (prob, sample["pair_id"], sample["label"] == "positive"))
    hits = 0
    for members in by_context.values():
        members.sort(key=lambda m: (-m[0], m[1]))
        hits += members[0][2]
    return hits / len(by_context)


def _batches(samples, batch_size, generator):
    order = torch.randperm(len(samples), generator=generator).tolist()
    for start in range(0, len(order), batch_size):
        yield [samples[i] for i in order[start: start + batch_size]]


class OutOfMemory(RuntimeError):
    """Raised with a tier-downgrade suggestion when the device runs out."""


def finetune_once(config: BridgeConfig, train_samples, val_samples,
                  batch_size: int, learning_rate: float, epochs: int) -> tuple:
    """One grid cell: returns (fine-tuned model, tokenizer, per-epoch recalls)."""
    tokenizer = load_tokenizer(config)
    model = build_model(config, tokenizer)
    model.train()
    optimizer = AdamW(model.parameters(), lr=learning_rate)
    generator = torch.Generator().manual_seed(config.seed)
    loss_fn = torch.nn.CrossEntropyLoss()
    pad_id = tokenizer.pad_token_id
    recalls = []
    for _ in range(epochs):
        model.train()
        for batch in _batches(train_samples, batch_size, generator):
            encoded = [build_token_ids(tokenizer, s["context"], s["response"],
                                       config.format, config.max_tokens)
                       for s in batch]
            width = max(len(ids) for ids, _ in encoded)
            input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
            type_ids = torch.zeros((len(batch), width), dtype=torch.long)
            mask = torch.zeros((len(batch), width), dtype=torch.long)
            for i, (ids, types) in enumerate(encoded):
                input_ids[i, :len(ids)] = torch.tensor(ids)
                type_ids[i, :len(types)] = torch.tensor(types)
                mask[i, :len(ids)] = 1
            # NSP convention: label 0 marks the true next sentence.
            labels = torch.tensor([0 if s["label"] == "positive" else 1
                                   for s in batch])
            optimizer.zero_grad()
            try:
                out = model(input_ids=input_ids.to(config.device),
                            token_type_ids=type_ids.to(config.device),
                            attention_mask=mask.to(config.device))
                loss = loss_fn(out.logits, labels.to(config.device))
                loss.backward()
                optimizer.step()
            except (torch.cuda.OutOfMemoryError, MemoryError) as exc:
                tier = config.tier()
                raise OutOfMemory(
                    f"out of memory fine-tuning tier {tier!r} at batch size "
                    f"{batch_size}; try a smaller tier or batch") from exc
        model.eval()
        recalls.append(recall_at_1(model, tokenizer, config, val_samples))
    return model, tokenizer, recalls


@dataclass
class SweepResult:
    rows: list   # dicts: batch, lr, epoch, recall1

    def to_csv(self) -> str:
        lines = ["batch,lr,epoch,recall@1"]
        for row in self.rows:
            lines.append(f"{row['batch']},{row['lr']!r},{row['epoch']},"
                         f"{row['recall1']!r}")
        return "\n".join(lines) + "\n"


def sweep(config: BridgeConfig, train_path, val_path,
          grid: dict | None = None, checkpoint_dir: Path | str | None = None,
          max_train: int | None = None, max_val: int | None = None) -> SweepResult:
    grid = {**DEFAULT_GRID, **(grid or {})}
    train_samples = read_dataset(train_path)
    val_samples = read_dataset(val_path)
    if max_train:
        train_samples = train_samples[:max_train]
    if max_val:
        val_samples = val_samples[:max_val]
    rows = []
    best = None
    for batch_size in grid["batch_sizes"]:
        for lr in grid["learning_rates"]:
            model, tokenizer, recalls = finetune_once(
                config, train_samples, val_samples, batch_size, lr,
                max(grid["epochs"]))
            for epoch in grid["epochs"]:
                row = {"batch": batch_size, "lr": lr, "epoch": epoch,
                       "recall1": recalls[epoch - 1]}
                rows.append(row)
                if best is None or row["recall1"] > best[0]:
                    best = (row["recall1"], model, tokenizer)
    if checkpoint_dir and best is not None:
        out = Path(checkpoint_dir)
        out.mkdir(parents=True, exist_ok=True)
        best[1].save_pretrained(out / "model")
        best[2].save_pretrained(out / "tokenizer")
    return SweepResult(rows=rows)
