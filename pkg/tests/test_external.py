import sys
from pathlib import Path

import pytest

from convalign.errors import ProbabilityOutOfRange, ProtocolError
from convalign.scorer.external import ExternalScorer

STUB = Path(__file__).parent / "stub_scorer.py"


def stub_command(*extra):
    return [sys.executable, str(STUB), *extra]


def test_echo_stub_constant(small_dataset):
    pairs = small_dataset[:20]
    with ExternalScorer(stub_command("--fixed", "0.5")) as scorer:
        predictions = scorer.predict_pairs(pairs)
    assert set(predictions.values()) == {0.5}
    assert set(predictions) == {p.pair_id for p in pairs}


def test_out_of_range_rejected(small_dataset):
    with ExternalScorer(stub_command("--fixed", "1.2")) as scorer:
        with pytest.raises(ProbabilityOutOfRange):
            scorer.predict_pairs(small_dataset[:1])


def test_overlap_stub_scores_in_range(small_dataset):
    pairs = small_dataset[:30]
    with ExternalScorer(stub_command()) as scorer:
        predictions = scorer.predict_pairs(pairs)
    assert all(0.0 <= v <= 1.0 for v in predictions.values())
    # positives repeat conversation vocabulary, so on average they overlap
    # their context more than random negatives do
    pos = [predictions[p.pair_id] for p in pairs if p.is_positive]
    neg = [predictions[p.pair_id] for p in pairs if not p.is_positive]
    assert sum(pos) / len(pos) >= sum(neg) / len(neg)


def test_count_tokens_verb():
    with ExternalScorer(stub_command()) as scorer:
        assert scorer.count_tokens("one two three") == 3
        assert scorer.token_count("one two three") == 3
        assert scorer.token_count("") == 0


def test_dead_process_raises():
    scorer = ExternalScorer([sys.executable, "-c", "pass"], timeout=5)
    scorer.start()
    with pytest.raises(ProtocolError):
        scorer.count_tokens("x")
    scorer.close()


def test_slow_process_times_out():
    from convalign.errors import ScorerTimeout
    scorer = ExternalScorer(
        [sys.executable, "-c", "import time; time.sleep(30)"], timeout=0.5)
    scorer.start()
    with pytest.raises(ScorerTimeout):
        scorer.count_tokens("x")
    scorer.close()


def test_sep_and_plain_differ(small_dataset):
    pair = next(p for p in small_dataset if p.is_positive)
    with ExternalScorer(stub_command(), format="plain") as plain:
        plain_probs = plain.predict_pairs([pair])
    with ExternalScorer(stub_command(), format="sep") as sep:
        sep_probs = sep.predict_pairs([pair])
    # The stub joins with " | " under sep, which perturbs word overlap for
    # multi-sentence contexts; both must still be valid probabilities.
    assert 0 <= plain_probs[pair.pair_id] <= 1
    assert 0 <= sep_probs[pair.pair_id] <= 1
