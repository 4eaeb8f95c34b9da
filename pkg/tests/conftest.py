import pytest

from convalign.dataset import (SamplingPolicy, SplitPlan, assign_splits,
                               build_positive_pairs, sample_negatives)
from convalign.synthetic import SynthSpec, generate
from convalign.tokenizer import train_bpe


@pytest.fixture(scope="session")
def small_corpus():
    spec = SynthSpec(n_conversations=8, sentences_range=(20, 30), seed=42)
    conversations, truth = generate(spec)
    return conversations, truth


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    conversations, _ = small_corpus
    texts = [s.text for c in conversations for s in c.sentences]
    return train_bpe(texts, 400)


@pytest.fixture(scope="session")
def small_dataset(small_corpus):
    conversations, _ = small_corpus
    positives = [p for c in conversations for p in build_positive_pairs(c)]
    positives = assign_splits(positives, SplitPlan(seed=5))
    return sample_negatives(positives, SamplingPolicy(seed=6))
