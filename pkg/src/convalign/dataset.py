"""Context-response pair construction, splitting and negative sampling.

A context is five consecutive sentences; the positive response is the sixth.
Negatives substitute the response of another positive from the same split.
Everything is seeded and deterministic: (corpus, seed) fixes the dataset
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientPool, MalformedDocument, TooFewPairs
from .transcript import Conversation, Sentence, Speaker

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ContextResponsePair:
    pair_id: str
    conversation_id: str
    context: tuple            # exactly `window` Sentences, in order
    response: Sentence
    label: str                # "positive" | "negative"
    split: str | None = None  # "train" | "val" | "test" | None
    response_speaker: Speaker = Speaker.DOCTOR

    @property
    def is_positive(self) -> bool:
        return self.label == "positive"

    @property
    def context_id(self) -> str:
        """Shared by a positive and the negatives built from its context."""
        conv, t = self.pair_id.split(":")[:2]
        return f"{conv}:{t}"


@dataclass(frozen=True)
class SamplingPolicy:
    negatives_train: int = 1
    negatives_eval: int = 9
    seed: int = 0

    def __post_init__(self):
        if self.negatives_train < 1 or self.negatives_eval < 1:
            raise ValueError("negative counts must be >= 1")

    def k_for(self, split: str) -> int:
        return self.negatives_train if split == "train" else self.negatives_eval


@dataclass(frozen=True)
class SplitPlan:
    fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0
    unit: str = "pair"        # "pair" | "conversation"

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise ValueError("split fractions must sum to 1")
        if self.unit not in ("pair", "conversation"):
            raise ValueError(f"unknown split unit: {self.unit}")


def build_positive_pairs(conversation: Conversation, window: int = 5) -> list:
    """All (context, next-sentence) positives; empty when T <= window."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if ":" in conversation.id:
        raise ValueError("conversation ids must not contain ':' (reserved for pair ids)")
    sentences = conversation.sentences
    pairs = []
    for t in range(window, len(sentences)):
        response = sentences[t]
        pairs.append(ContextResponsePair(
            pair_id=f"{conversation.id}:{response.index}",
            conversation_id=conversation.id,
            context=tuple(sentences[t - window: t]),
            response=response,
            label="positive",
            response_speaker=response.speaker,
        ))
    return pairs


def build_inference_pairs(conversation: Conversation, window: int = 5) -> list:
    """Positives for scoring time; no negatives, no split assignment.

    The first `window` sentences receive no prediction. A conversation with
    T <= window yields no pairs and cannot be alignment-scored.
    """
    return build_positive_pairs(conversation, window=window)


def split_pairs(positives: Sequence[ContextResponsePair], plan: SplitPlan) -> dict:
    """Assign each positive pair_id to train/val/test.

    With unit="pair": a seeded uniform shuffle, then a floor-rule partition
    (n_val = floor(f_val*N), n_test = floor(f_test*N), train takes the rest).
    With unit="conversation": whole conversations are dealt to splits in
    shuffled order until each split's pair quota is filled, so no
    conversation spans splits (fractions then hold only approximately).
    """
    n = len(positives)
    if n < 5:
        raise TooFewPairs(f"need at least 5 positives to split, got {n}")
    n_val = int(np.floor(plan.fractions[1] * n))
    n_test = int(np.floor(plan.fractions[2] * n))
    n_train = n - n_val - n_test

    rng = np.random.default_rng(plan.seed)
    assignment: dict = {}
    if plan.unit == "pair":
        order = rng.permutation(n)
        for rank, idx in enumerate(order):
            if rank < n_train:
                split = "train"
            elif rank < n_train + n_val:
                split = "val"
            else:
                split = "test"
            assignment[positives[idx].pair_id] = split
    else:
        conv_ids = sorted({p.conversation_id for p in positives})
        by_conv: dict = {cid: [] for cid in conv_ids}
        for p in positives:
            by_conv[p.conversation_id].append(p.pair_id)
        order = rng.permutation(len(conv_ids))
        filled = 0
        for idx in order:
            cid = conv_ids[idx]
            if filled < n_train:
                split = "train"
            elif filled < n_train + n_val:
                split = "val"
            else:
                split = "test"
            for pid in by_conv[cid]:
                assignment[pid] = split
            filled += len(by_conv[cid])
    return assignment


def assign_splits(positives: Sequence[ContextResponsePair], plan: SplitPlan) -> list:
    assignment = split_pairs(positives, plan)
    return [replace(p, split=assignment[p.pair_id]) for p in positives]


def sample_negatives(split_positives: Sequence[ContextResponsePair],
                     policy: SamplingPolicy) -> list:
    """Attach k negatives per positive, drawn within the positive's split.

    The pool for one positive is the response sentences of the *other*
    positives in the same split; its own ground-truth response is excluded,
    and the k draws are without replacement, so each evaluation candidate
    set (positive + 9 negatives) holds 10 distinct responses. Each split
    samples from an independently seeded generator.
    """
    by_split: dict = {}
    for p in split_positives:
        if p.split is None:
            raise ValueError(f"positive {p.pair_id} has no split assigned")
        if not p.is_positive:
            raise ValueError("sample_negatives expects positives only")
        by_split.setdefault(p.split, []).append(p)

    negatives_of: dict = {}
    for split, positives in by_split.items():
        k = policy.k_for(split)
        n = len(positives)
        if n - 1 < k:
            raise InsufficientPool(
                f"split {split!r}: pool of {n - 1} other responses < k={k}")
        rng = np.random.default_rng([policy.seed, SPLITS.index(split)])
        if k == 1:
            draws = rng.integers(0, n - 1, size=n)
            draws = draws + (draws >= np.arange(n))
            all_draws = draws[:, None]
        else:
            all_draws = np.empty((n, k), dtype=np.int64)
            for i in range(n):
                row = rng.choice(n - 1, size=k, replace=False)
                all_draws[i] = row + (row >= i)
        for i, pos in enumerate(positives):
            negatives = []
            for j, src in enumerate(all_draws[i], start=1):
                donor = positives[int(src)]
                negatives.append(ContextResponsePair(
                    pair_id=f"{pos.pair_id}:n{j}",
                    conversation_id=pos.conversation_id,
                    context=pos.context,
                    response=donor.response,
                    label="negative",
                    split=split,
                    response_speaker=donor.response.speaker,
                ))
            negatives_of[pos.pair_id] = negatives

    out = []
    for p in split_positives:
        out.append(p)
        out.extend(negatives_of[p.pair_id])
    return out


def write_pairs(pairs: Iterable[ContextResponsePair], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({
                "pair_id": p.pair_id,
                "conversation_id": p.conversation_id,
                "split": p.split,
                "label": p.label,
                "context": [s.text for s in p.context],
                "context_speakers": [s.speaker.value for s in p.context],
                "response": p.response.text,
                "response_speaker": p.response_speaker.value,
            }, ensure_ascii=False) + "\n")


def read_pairs(path: Path | str) -> list:
    """Read a dataset JSONL file.

    Context sentence indices are not stored on disk; reconstructed sentences
    carry index 0 except a positive's response, whose index is recovered
    from the pair_id. Training and evaluation only consume texts and labels.
    """
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{lineno}: {exc}") from exc
            id_parts = rec["pair_id"].split(":")
            response_index = 0
            if rec["label"] == "positive" and len(id_parts) >= 2:
                response_index = int(id_parts[1])
            context = tuple(
                Sentence(index=0, speaker=Speaker(spk), text=txt, raw_text=txt)
                for txt, spk in zip(rec["context"], rec["context_speakers"]))
            speaker = Speaker(rec["response_speaker"])
            pairs.append(ContextResponsePair(
                pair_id=rec["pair_id"],
                conversation_id=rec["conversation_id"],
                context=context,
                response=Sentence(index=response_index, speaker=speaker,
                                  text=rec["response"], raw_text=rec["response"]),
                label=rec["label"],
                split=rec["split"],
                response_speaker=speaker,
            ))
    return pairs
