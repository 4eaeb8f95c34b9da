import numpy as np
import pytest

from nspbridge.models import BridgeConfig, build_model, load_tokenizer, \
    train_tokenizer

TOPICS = ["dose", "clinic", "stroke", "warfarin", "bleeding", "risk",
          "calendar", "pharmacy", "insurance", "appointment", "valve",
          "rhythm", "dizzy", "tablet", "monitor"]

FILLER = ["well", "okay", "so", "right", "sure", "maybe", "today",
          "about", "again", "question"]


def corpus_lines(rng, n=300):
    lines = []
    for _ in range(n):
        words = [str(rng.choice(TOPICS)) for _ in range(rng.integers(2, 5))]
        words += [str(rng.choice(FILLER)) for _ in range(rng.integers(2, 5))]
        lines.append(" ".join(words) + ".")
    return lines


@pytest.fixture(scope="session")
def tokenizer_file(tmp_path_factory):
    rng = np.random.default_rng(0)
    path = tmp_path_factory.mktemp("tok") / "tokenizer.json"
    train_tokenizer(corpus_lines(rng), vocab_size=400, out_path=path)
    return path


@pytest.fixture(scope="session")
def bridge_config(tokenizer_file):
    return BridgeConfig(model_source="seeded:tiny",
                        tokenizer_path=str(tokenizer_file), seed=3)


@pytest.fixture(scope="session")
def bridge(bridge_config):
    tokenizer = load_tokenizer(bridge_config)
    model = build_model(bridge_config, tokenizer)
    return model, tokenizer, bridge_config


def synth_sample(rng, pair_id, label, topic, other_topic):
    # Maximal lexical signal: a sentence is its topic word three times, so
    # a true response shares all content tokens with its context and a
    # false one shares none. A randomly initialized tiny encoder can pick
    # this up within a couple of epochs.
    def sentence(t):
        return " ".join([t] * 3) + "."

    context = [sentence(topic) for _ in range(5)]
    response = sentence(topic if label == "positive" else other_topic)
    return {"pair_id": pair_id, "conversation_id": pair_id.split(":")[0],
            "split": "train", "label": label, "context": context,
            "context_speakers": ["doctor"] * 5, "response": response,
            "response_speaker": "patient"}


def make_dataset(rng, n_contexts, negatives):
    """Dataset JSONL records in the pipeline's schema, topic-separable."""
    samples = []
    for i in range(n_contexts):
        topic = TOPICS[int(rng.integers(0, len(TOPICS)))]
        pair_id = f"conv{i:03d}:6"
        samples.append(synth_sample(rng, pair_id, "positive", topic, topic))
        for j in range(negatives):
            other = TOPICS[int((TOPICS.index(topic) + 1 + j) % len(TOPICS))]
            samples.append(synth_sample(rng, f"{pair_id}:n{j + 1}",
                                        "negative", topic, other))
    return samples
