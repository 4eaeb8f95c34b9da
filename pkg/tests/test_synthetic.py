import pytest

from convalign.dataset import build_inference_pairs
from convalign.scorer.baselines import TableScorer
from convalign.synthetic import GroundTruth, SynthSpec, generate, write_corpus
from convalign.tokenizer import train_bpe
from convalign.transcript import Speaker, parse_transcript
from convalign import alignment as ca


def test_deterministic_given_seed(tmp_path):
    spec = SynthSpec(n_conversations=5, seed=9)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    for out in (a_dir, b_dir):
        conversations, truth = generate(spec)
        write_corpus(conversations, truth, out)
    for name in sorted(p.name for p in a_dir.iterdir()):
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()


def test_different_seed_differs():
    a, _ = generate(SynthSpec(n_conversations=3, seed=1))
    b, _ = generate(SynthSpec(n_conversations=3, seed=2))
    assert [c.sentences for c in a] != [c.sentences for c in b]


def test_conversations_pass_transcript_validation(small_corpus, tmp_path):
    conversations, truth = small_corpus
    write_corpus(conversations, truth, tmp_path)
    for conversation in conversations:
        reparsed = parse_transcript(tmp_path / f"{conversation.id}.jsonl")
        assert reparsed == conversation
        assert reparsed.is_dyadic_complete()
        assert len(reparsed) >= 1


def test_disjoint_pools_when_overlap_zero():
    conversations, _ = generate(SynthSpec(n_conversations=6, vocab_overlap=0.0,
                                          topic_word_fraction=0.0, seed=3))
    doctor_words = set()
    patient_words = set()
    for conversation in conversations:
        for sentence in conversation.sentences:
            words = {w.strip(".").lower() for w in sentence.text.split()}
            if sentence.speaker is Speaker.DOCTOR:
                doctor_words |= words
            else:
                patient_words |= words
    assert doctor_words.isdisjoint(patient_words)


def test_shared_pool_when_overlap_one():
    conversations, _ = generate(SynthSpec(n_conversations=6, vocab_overlap=1.0,
                                          topic_word_fraction=0.0, seed=3))
    doctor_words = set()
    patient_words = set()
    for conversation in conversations:
        for sentence in conversation.sentences:
            words = {w.strip(".").lower() for w in sentence.text.split()}
            (doctor_words if sentence.speaker is Speaker.DOCTOR
             else patient_words).update(words)
    assert doctor_words & patient_words


def run_alignment(conversations, truth, vocab):
    scorer = TableScorer(truth.prob_table)
    summaries = []
    for conversation in conversations:
        pairs = build_inference_pairs(conversation)
        if not pairs:
            continue
        probs = scorer.predict_pairs(pairs)
        predictions = {p.response.index: probs[p.pair_id] for p in pairs}
        counts = [vocab.token_count(s.text) for s in conversation.sentences]
        trace = ca.score_conversation(conversation, predictions, counts)
        summaries.append(trace.scores)
    return summaries


@pytest.fixture(scope="module")
def flat_setup():
    conversations, truth = generate(
        SynthSpec(n_conversations=12, trend="flat", seed=21,
                  sentences_range=(30, 40)))
    vocab = train_bpe([s.text for c in conversations for s in c.sentences], 400)
    return conversations, truth, vocab


def test_flat_trend_absmax_zero(flat_setup):
    conversations, truth, vocab = flat_setup
    summaries = run_alignment(conversations, truth, vocab)
    assert summaries
    for scores in summaries:
        if scores.absmax is None:
            continue
        assert scores.absmax == pytest.approx(0.0, abs=1e-12)
        assert scores.max is None and scores.min is None


def test_converging_trend_yields_positive_max():
    conversations, truth = generate(
        SynthSpec(n_conversations=12, trend="converging", seed=22,
                  sentences_range=(30, 40)))
    vocab = train_bpe([s.text for c in conversations for s in c.sentences], 400)
    summaries = run_alignment(conversations, truth, vocab)
    positives = [s for s in summaries if s.max is not None]
    assert len(positives) >= len(summaries) * 0.8
    for scores in positives:
        assert scores.max > 0


def test_ground_truth_csv_roundtrip(small_corpus):
    _, truth = small_corpus
    table = GroundTruth.probs_from_csv(truth.probs_csv())
    assert table == truth.prob_table


def test_outcomes_within_instrument_range(small_corpus):
    _, truth = small_corpus
    for row in truth.rows:
        assert 0.0 <= row["option12"] <= 100.0
        assert 0.0 <= row["dcs"] <= 100.0
