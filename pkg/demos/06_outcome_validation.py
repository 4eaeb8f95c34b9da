"""
Outcome association and multiplicity control
============================================

Regress alignment scores against encounter outcomes three ways (unadjusted,
covariate-adjusted, clinician random-intercept REML) and apply the
Benjamini-Hochberg step-up at q = 0.2 across the mixed-model p-values.

The synthetic corpus links one outcome to the planted convergence amplitude,
so exactly that family of cells should survive correction.
"""

import tempfile
from pathlib import Path

from convalign import pipeline
from convalign.config import PipelineConfig, ScorerSettings, TokenizerSettings
from convalign.stats import bh_adjust
from convalign.synthetic import SynthSpec, generate, write_corpus

tmp = Path(tempfile.mkdtemp(prefix="convalign_demo_"))
corpus_dir = tmp / "corpus"
conversations, truth = generate(SynthSpec(
    n_conversations=120, trend="converging", seed=3,
    option12_link=(30.0, 40.0), dcs_link=(50.0, 0.0), outcome_noise_sd=5.0,
    n_clinicians=30))
write_corpus(conversations, truth, corpus_dir)

config = PipelineConfig(
    corpus_dir=str(corpus_dir), work_dir=str(tmp / "work"), seed=3,
    tokenizer=TokenizerSettings(vocab_size=300),
    scorers=(
        ScorerSettings(kind="planted", model_id="planted",
                       prob_table=str(corpus_dir / "planted_probs.csv")),
        ScorerSettings(kind="overlap", model_id="overlap"),
    ))
pipeline.ingest(config)
pipeline.build_dataset(config)
pipeline.align(config)
table = pipeline.validate(config)

print("outcome  model    method  mixed estimate (se)      p        BH")
for line in table.strip().splitlines()[1:]:
    c = line.split(",")
    print(f"{c[0]:8s} {c[1]:8s} {c[2]:7s} "
          f"{float(c[9]):10.2f} ({float(c[10]):.2f})  {float(c[11]):8.2e} {c[12]}")

print("\nthe option12 x planted cells carry the planted effect; overlap-model "
      "and dcs cells are noise")

# The step-up rule on its own, over a sixteen-cell reference set:
reference = [0.762, 0.920, 0.908, 0.436, 0.020, 0.186, 0.007, 0.848,
             0.082, 0.618, 0.032, 0.592, 0.617, 0.283, 0.563, 0.517]
report = bh_adjust(reference, q=0.2)
print(f"\nreference p-values at q=0.2: rejected "
      f"{sorted(p for p, f in zip(reference, report.rejected) if f)}")
