"""
The file-mediated pipeline through the CLI
==========================================

Every stage is a subcommand over a single JSON config; artifacts land in the
work directory beside the resolved config and its hash, and `report` stitches
them into one markdown summary (refusing mismatched hashes).
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from convalign.config import (PipelineConfig, ScorerSettings,
                              TokenizerSettings, save_config)

tmp = Path(tempfile.mkdtemp(prefix="convalign_cli_"))


def run(*args):
    command = [sys.executable, "-m", "convalign.cli", *args]
    print("$", " ".join(map(str, args)))
    subprocess.run(command, check=True)


run("synth", str(tmp / "corpus"), "--conversations", "24", "--seed", "2")

config = PipelineConfig(
    corpus_dir=str(tmp / "corpus"), work_dir=str(tmp / "work"), seed=2,
    tokenizer=TokenizerSettings(vocab_size=300),
    scorers=(
        ScorerSettings(kind="neural", model_id="nsp", neural={
            "embedding_dim": 8, "encoder_heads": 2, "encoder_layers": 1,
            "lstm_encoder_hidden": 8, "lstm_agg_hidden": 8,
            "learning_rate": 1e-3, "batch_size": 64, "max_epochs": 2,
            "patience": 5, "max_tokens": 64}),
        ScorerSettings(kind="planted", model_id="planted",
                       prob_table=str(tmp / "corpus" / "planted_probs.csv")),
    ))
config_path = tmp / "config.json"
save_config(config, config_path)

for stage in ("ingest", "build-dataset", "train-scorer", "eval-recall",
              "align", "validate"):
    run(stage, "--config", str(config_path))
run("report", str(tmp / "work"))

print("\nartifacts:")
for path in sorted((tmp / "work").glob("*")):
    print(" ", path.name)
print("\nreport preview:")
print("\n".join((tmp / "work" / "report.md").read_text().splitlines()[:14]))
