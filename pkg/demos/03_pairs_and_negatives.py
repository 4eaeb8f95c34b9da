"""
Context-response pairs, splits and negative sampling
====================================================

Five consecutive sentences form the context; the sixth is the true response.
Train keeps 1 negative per positive, evaluation splits keep 9, and the
floor rule sends a 42559-positive corpus to exactly 25537/8511/8511.
"""

import numpy as np

from convalign.dataset import (SamplingPolicy, SplitPlan, assign_splits,
                               build_positive_pairs, sample_negatives)
from convalign.synthetic import SynthSpec, generate

conversations, _ = generate(SynthSpec(n_conversations=20, seed=1))
positives = [p for c in conversations for p in build_positive_pairs(c)]
print(f"{len(conversations)} conversations -> {len(positives)} positive pairs")

one = positives[0]
print(f"\npair {one.pair_id}: context sentences "
      f"{[s.index for s in one.context]} -> response {one.response.index}")

positives = assign_splits(positives, SplitPlan(seed=7))
for split in ("train", "val", "test"):
    print(split, sum(1 for p in positives if p.split == split))

samples = sample_negatives(positives, SamplingPolicy(seed=7))
val = [p for p in samples if p.split == "val"]
print(f"\nval samples {len(val)} = positives x 10 "
      f"(each context now has 10 candidate responses)")

# The floor rule at full scale:
n = 42559
n_val = int(np.floor(0.2 * n))
print(f"\nN={n}: train {n - 2 * n_val}, val {n_val}, test {n_val};"
      f" with negatives {2 * (n - 2 * n_val)}, {10 * n_val}, {10 * n_val}")
