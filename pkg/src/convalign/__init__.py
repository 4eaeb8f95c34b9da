"""convalign: conversational-alignment scoring for dyadic transcripts.

The pipeline has three stages: next-sentence-prediction scorers over
context-response pairs, per-conversation alignment scores summarizing how
the two speakers' predicted-probability profiles converge, and regression
of those scores against encounter outcomes with multiplicity control.
"""

from . import (alignment, dataset, evalrank, errors, scorer, stats,
               synthetic, tokenizer, transcript)

__version__ = "0.1.0"

__all__ = [
    "alignment", "dataset", "errors", "evalrank", "scorer", "stats",
    "synthetic", "tokenizer", "transcript", "__version__",
]
