"""nspbridge: pretrained-encoder NSP scorer behind the JSONL wire protocol."""

from .models import TIERS, BridgeConfig, ModelLoadError, build_model, \
    load_tokenizer, train_tokenizer
from .scoring import build_token_ids, score_requests
from .serve import handle_line, serve

__version__ = "0.1.0"
__all__ = [
    "BridgeConfig", "ModelLoadError", "TIERS", "build_model",
    "build_token_ids", "handle_line", "load_tokenizer", "score_requests",
    "serve", "train_tokenizer", "__version__",
]
