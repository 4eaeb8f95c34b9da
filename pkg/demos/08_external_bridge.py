"""
Plugging in the encoder bridge
==============================

The pipeline talks to any scorer speaking the newline-delimited JSON
protocol. Here the companion bridge package (bridge/, install separately)
serves a seeded bidirectional encoder with an NSP head; the align stage
segments conversations with the bridge's own token counts via the
count_tokens verb.

Requires: pip install -e ./bridge --no-build-isolation
"""

import sys
import tempfile
from pathlib import Path

try:
    from nspbridge.models import train_tokenizer
except ImportError:
    sys.exit("install the bridge first: pip install -e ./bridge")

from convalign import pipeline
from convalign.config import PipelineConfig, ScorerSettings, TokenizerSettings
from convalign.synthetic import SynthSpec, generate, write_corpus

tmp = Path(tempfile.mkdtemp(prefix="convalign_bridge_"))
corpus_dir = tmp / "corpus"
conversations, truth = generate(SynthSpec(n_conversations=12,
                                          sentences_range=(24, 30), seed=8))
write_corpus(conversations, truth, corpus_dir)

texts = [s.text for c in conversations for s in c.sentences]
train_tokenizer(texts, 400, tmp / "tokenizer.json")

bridge_command = (sys.executable, "-m", "nspbridge.cli", "serve",
                  "--model", "seeded:tiny",
                  "--tokenizer", str(tmp / "tokenizer.json"), "--seed", "3")
config = PipelineConfig(
    corpus_dir=str(corpus_dir), work_dir=str(tmp / "work"), seed=8,
    tokenizer=TokenizerSettings(vocab_size=300),
    scorers=(ScorerSettings(kind="external", model_id="bridge-tiny",
                            command=bridge_command, wire_format="sep",
                            timeout=300),))

pipeline.ingest(config)
pipeline.build_dataset(config)
print(pipeline.eval_recall(config))
traces = pipeline.align(config)
print(f"{len(traces)} conversations aligned with the bridge's tokenizer "
      f"({traces[0].tokenizer_id})")
print("\nseeded weights score at chance; swap --model for local:<checkpoint> "
      "after fine-tuning (see the bridge's finetune subcommand)")
