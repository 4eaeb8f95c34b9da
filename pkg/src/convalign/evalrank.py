"""Rank-based scorer evaluation: recall@k over fixed candidate sets."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .dataset import ContextResponsePair
from .errors import KOutOfRange, MissingPrediction


@dataclass(frozen=True)
class CandidateSet:
    """One ranking problem: n candidates, exactly one ground truth."""

    context_id: str
    candidates: tuple   # of (pair_id, is_ground_truth)

    def __post_init__(self):
        truths = sum(1 for _, is_gt in self.candidates if is_gt)
        if truths != 1:
            raise ValueError(f"{self.context_id}: expected 1 ground truth, got {truths}")
        if len(self.candidates) < 2:
            raise ValueError(f"{self.context_id}: need at least 2 candidates")

    @property
    def n(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class RecallReport:
    model: str
    size: str                     # parameter count or "-" for training-free scorers
    n: int
    n_contexts: int
    recall: Mapping[int, float]   # k -> proportion


def candidate_sets_from_pairs(pairs: Sequence[ContextResponsePair]) -> list:
    """Group a sampled dataset (positives + negatives) into candidate sets."""
    grouped: dict = {}
    for p in pairs:
        grouped.setdefault(p.context_id, []).append((p.pair_id, p.is_positive))
    return [CandidateSet(context_id=cid, candidates=tuple(members))
            for cid, members in grouped.items()]


def recall_at_k(predictions: Mapping[str, float],
                sets: Iterable[CandidateSet], k: int) -> float:
    """Fraction of sets whose ground truth ranks in the top k.

    Candidates sort by probability descending with a stable tie-break on
    ascending pair_id, so permuting candidate order never changes the result.
    """
    hits = 0
    total = 0
    for cset in sets:
        if not 1 <= k <= cset.n:
            raise KOutOfRange(f"k={k} outside 1..{cset.n} for {cset.context_id}")
        try:
            ranked = sorted(cset.candidates,
                            key=lambda c: (-predictions[c[0]], c[0]))
        except KeyError as exc:
            raise MissingPrediction(f"no prediction for candidate {exc}") from exc
        rank = next(i for i, (_, is_gt) in enumerate(ranked, start=1) if is_gt)
        hits += rank <= k
        total += 1
    if total == 0:
        raise ValueError("no candidate sets supplied")
    return hits / total


def recall_report(model: str, predictions: Mapping[str, float],
                  sets: Sequence[CandidateSet],
                  ks: Sequence[int] = (1, 2, 5), size: str = "-") -> RecallReport:
    n = min(s.n for s in sets) if sets else 0
    recall = {k: recall_at_k(predictions, sets, k) for k in ks if k <= n}
    return RecallReport(model=model, size=size, n=n,
                        n_contexts=len(sets), recall=recall)


def render_recall_csv(reports: Sequence[RecallReport],
                      ks: Sequence[int] = (1, 2, 5)) -> str:
    buf = io.StringIO()
    buf.write("model,size," + ",".join(f"recall@{k}" for k in ks) + "\n")
    for rep in reports:
        cells = [rep.model, rep.size]
        for k in ks:
            value = rep.recall.get(k)
            cells.append("" if value is None else repr(round(value, 6)))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
