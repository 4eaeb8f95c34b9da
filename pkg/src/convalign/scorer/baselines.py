"""Training-free scorers: deterministic baselines and test oracles."""

from __future__ import annotations

from typing import Mapping, Sequence

from ..dataset import ContextResponsePair
from ..tokenizer import SubwordVocab


class OverlapScorer:
    """Fraction of the response's distinct tokens that appear in the context.

    An empty response scores 0. No training; useful both as a sanity
    baseline and as a second model in synthetic validation runs.
    """

    def __init__(self, vocab: SubwordVocab, model_id: str = "overlap"):
        self.vocab = vocab
        self.model_id = model_id

    def predict_pair(self, pair: ContextResponsePair) -> float:
        resp = set(self.vocab.encode(pair.response.text).ids)
        if not resp:
            return 0.0
        ctx = set()
        for sentence in pair.context:
            ctx.update(self.vocab.encode(sentence.text).ids)
        return len(resp & ctx) / len(resp)

    def predict_pairs(self, pairs: Sequence[ContextResponsePair]) -> dict:
        return {p.pair_id: self.predict_pair(p) for p in pairs}

    def token_count(self, text: str) -> int:
        return self.vocab.token_count(text)


class ConstantScorer:
    """Same probability for everything; ranking then falls to tie-breaks."""

    def __init__(self, value: float = 0.5, model_id: str = "constant"):
        self.value = value
        self.model_id = model_id

    def predict_pairs(self, pairs: Sequence[ContextResponsePair]) -> dict:
        return {p.pair_id: self.value for p in pairs}


class LabelOracleScorer:
    """Reads the label: 1 for the ground truth, 0 for negatives."""

    model_id = "oracle"

    def predict_pairs(self, pairs: Sequence[ContextResponsePair]) -> dict:
        return {p.pair_id: (1.0 if p.is_positive else 0.0) for p in pairs}


class TableScorer:
    """Serves planted probabilities by (conversation_id, response index).

    The synthetic generator emits such a table; scoring through it gives the
    alignment pipeline a scorer with exactly known behavior.
    """

    def __init__(self, table: Mapping, model_id: str = "planted",
                 default: float = 0.5):
        self.table = dict(table)
        self.model_id = model_id
        self.default = default

    def predict_pairs(self, pairs: Sequence[ContextResponsePair]) -> dict:
        out = {}
        for p in pairs:
            key = (p.conversation_id, p.response.index)
            out[p.pair_id] = float(self.table.get(key, self.default))
        return out
