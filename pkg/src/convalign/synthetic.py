"""Seeded synthetic dyadic corpora with known ground truth.

Sentences are bags of speaker-pool and topic words with templated
punctuation — deliberately unnatural, because what is under test is the
statistical pipeline, not the language. Each conversation gets a planted
per-sentence probability profile whose speaker gap follows a chosen trend
(converging / diverging / flat) with amplitude gamma, and outcomes linked to
gamma, so the whole chain from scoring through regression has an exactly
known target.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .transcript import Conversation, TranscriptFormat, parse_transcript

TRENDS = ("converging", "diverging", "flat")


@dataclass(frozen=True)
class SynthSpec:
    n_conversations: int = 50
    sentences_range: tuple = (24, 48)
    words_per_sentence: tuple = (3, 8)
    pool_size: int = 40
    vocab_overlap: float = 0.0          # rho: shared fraction of speaker pools
    topic_pool_size: int = 300
    topics_per_conversation: int = 6
    topic_word_fraction: float = 0.5
    trend: str = "converging"
    gamma_range: tuple = (0.2, 0.9)     # planted convergence amplitude
    option12_link: tuple = (30.0, 40.0)  # outcome = a + b*gamma + noise
    dcs_link: tuple = (50.0, 0.0)
    outcome_noise_sd: float = 5.0
    n_clinicians: int = 12
    clinician_sd: float = 0.0
    annotation_rate: float = 0.1        # raw-text [laughs] insertions
    exact_total_positives: int | None = None
    window: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.vocab_overlap <= 1.0:
            raise ValueError("vocab_overlap must be in [0, 1]")
        if self.trend not in TRENDS:
            raise ValueError(f"trend must be one of {TRENDS}")
        if self.sentences_range[0] > self.sentences_range[1] or \
                self.words_per_sentence[0] > self.words_per_sentence[1]:
            raise ValueError("ranges must be non-empty")


@dataclass
class GroundTruth:
    rows: list = field(default_factory=list)
    prob_table: dict = field(default_factory=dict)   # (conv_id, index) -> prob

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("conversation_id,trend,planted_ca,option12,dcs,clinician_id\n")
        for row in self.rows:
            buf.write(",".join([
                row["conversation_id"], row["trend"], repr(row["planted_ca"]),
                repr(row["option12"]), repr(row["dcs"]), row["clinician_id"],
            ]) + "\n")
        return buf.getvalue()

    def probs_csv(self) -> str:
        buf = io.StringIO()
        buf.write("conversation_id,sentence_index,prob\n")
        for (conv_id, index), prob in sorted(self.prob_table.items()):
            buf.write(f"{conv_id},{index},{prob!r}\n")
        return buf.getvalue()

    @classmethod
    def probs_from_csv(cls, text: str) -> dict:
        table = {}
        for line in text.splitlines()[1:]:
            if not line:
                continue
            conv_id, index, prob = line.split(",")
            table[(conv_id, int(index))] = float(prob)
        return table


def _word_pools(spec: SynthSpec) -> tuple:
    shared_n = round(spec.vocab_overlap * spec.pool_size)
    own_n = spec.pool_size - shared_n
    shared = [f"com{i}" for i in range(shared_n)]
    doctor = shared + [f"dok{i}" for i in range(own_n)]
    patient = shared + [f"pax{i}" for i in range(own_n)]
    topics = [f"top{i}" for i in range(spec.topic_pool_size)]
    return doctor, patient, topics


def _trend_value(trend: str, position: float) -> float:
    if trend == "converging":
        return 1.0 - position
    if trend == "diverging":
        return position
    return 1.0


def _sentence_counts(spec: SynthSpec, rng: np.random.Generator) -> list:
    n = spec.n_conversations
    if spec.exact_total_positives is not None:
        base, rem = divmod(spec.exact_total_positives, n)
        return [spec.window + base + (1 if i < rem else 0) for i in range(n)]
    lo, hi = spec.sentences_range
    return [int(t) for t in rng.integers(lo, hi + 1, size=n)]


def generate(spec: SynthSpec) -> tuple:
    """Build (conversations, ground truth) deterministically from the seed.

    Every conversation is emitted through the transcript parser, so the
    output is guaranteed to satisfy transcript-module validation. Planted
    probabilities put the two speakers 0.5 +- gamma*f(t)/2 apart, where f
    follows the trend, so interval team differences inherit the trend and a
    flat trend yields exactly constant team differences.
    """
    doctor_pool, patient_pool, topic_pool = _word_pools(spec)
    counts = _sentence_counts(spec, np.random.default_rng([spec.seed, 0]))
    conversations = []
    truth = GroundTruth()

    clin_rng = np.random.default_rng([spec.seed, 1])
    clinician_of = clin_rng.integers(0, spec.n_clinicians,
                                     size=spec.n_conversations)
    clin_effects = clin_rng.standard_normal(spec.n_clinicians) * spec.clinician_sd

    for i in range(spec.n_conversations):
        rng = np.random.default_rng([spec.seed, 2, i])
        conv_id = f"synth{i:04d}"
        t_total = counts[i]
        topics = list(rng.choice(topic_pool, size=spec.topics_per_conversation,
                                 replace=False))
        gamma = float(rng.uniform(*spec.gamma_range))

        lines = []
        age = float(np.clip(rng.normal(70, 10), 40, 95))
        sex = "female" if rng.random() < 0.34 else "male"
        race = str(rng.choice(["white", "black", "asian", "multiple"],
                              p=[0.8, 0.14, 0.02, 0.04]))
        arm = "decision-aid" if rng.random() < 0.5 else "usual-care"
        clin_id = f"clin{int(clinician_of[i]):03d}"
        noise = rng.standard_normal(2) * spec.outcome_noise_sd
        effect = float(clin_effects[clinician_of[i]])
        option12 = float(np.clip(
            spec.option12_link[0] + spec.option12_link[1] * gamma + effect + noise[0],
            0.0, 100.0))
        dcs = float(np.clip(
            spec.dcs_link[0] + spec.dcs_link[1] * gamma + effect + noise[1],
            0.0, 100.0))
        duration = float(np.clip(rng.normal(32, 16), 5, 90))
        header = {
            "id": conv_id,
            "metadata": {"age": round(age, 1), "sex": sex, "race": race,
                         "arm": arm, "clinician_id": clin_id,
                         "option12": round(option12, 2), "dcs": round(dcs, 2),
                         "duration_min": round(duration, 1)},
        }
        lines.append(json.dumps(header, ensure_ascii=False))

        for t in range(1, t_total + 1):
            speaker = "doctor" if t % 2 == 1 else "patient"
            pool = doctor_pool if speaker == "doctor" else patient_pool
            n_words = int(rng.integers(spec.words_per_sentence[0],
                                       spec.words_per_sentence[1] + 1))
            words = []
            for _ in range(n_words):
                if rng.random() < spec.topic_word_fraction:
                    words.append(str(topics[int(rng.integers(0, len(topics)))]))
                else:
                    words.append(str(pool[int(rng.integers(0, len(pool)))]))
            text = " ".join(words).capitalize() + "."
            if rng.random() < spec.annotation_rate:
                text += " [laughs]"
            lines.append(json.dumps({"speaker": speaker, "text": text},
                                    ensure_ascii=False))

            position = (t - 1) / (t_total - 1) if t_total > 1 else 0.0
            gap = gamma * _trend_value(spec.trend, position)
            prob = 0.5 + gap / 2.0 if speaker == "doctor" else 0.5 - gap / 2.0
            truth.prob_table[(conv_id, t)] = float(prob)

        conversation = parse_transcript("\n".join(lines) + "\n",
                                        TranscriptFormat.JSONL)
        conversations.append(conversation)
        truth.rows.append({
            "conversation_id": conv_id, "trend": spec.trend,
            "planted_ca": gamma, "option12": option12, "dcs": dcs,
            "clinician_id": clin_id,
        })
    return conversations, truth


def write_corpus(conversations: Sequence[Conversation], truth: GroundTruth,
                 directory: Path | str) -> None:
    """Standard transcript JSONL per conversation plus ground_truth.csv."""
    from .transcript import serialize_transcript
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for conversation in conversations:
        with open(directory / f"{conversation.id}.jsonl", "w",
                  encoding="utf-8") as fh:
            serialize_transcript(conversation, fh)
    (directory / "ground_truth.csv").write_text(truth.to_csv(), encoding="utf-8")
    (directory / "planted_probs.csv").write_text(truth.probs_csv(),
                                                 encoding="utf-8")
