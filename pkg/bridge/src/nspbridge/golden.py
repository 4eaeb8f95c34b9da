"""Golden-file contract: a fixed request set whose probabilities must
reproduce across runs and installs of the same bridge build.

The set is synthesized deterministically here (20 context-response pairs)
so no external data is needed. `record` writes the reference file at build
time; `check` replays the set and compares within tolerance.
"""

from __future__ import annotations

import json
from pathlib import Path

from .models import BridgeConfig, build_model, load_tokenizer
from .scoring import score_requests

TOLERANCE = 1e-5

_TOPICS = ["dose", "clinic", "stroke", "warfarin", "bleeding",
           "appointment", "risk", "calendar", "pharmacy", "insurance"]


def golden_requests() -> list:
    requests = []
    for i in range(20):
        topic = _TOPICS[i % len(_TOPICS)]
        other = _TOPICS[(i + 3) % len(_TOPICS)]
        context = [
            f"So about the {topic} we discussed.",
            f"The {topic} numbers looked fine last week.",
            "Do you have any questions so far?",
            f"I was wondering about the {topic} again.",
            f"Right, the {topic} is the main thing today.",
        ]
        response = (f"Yes, let us go over the {topic} once more."
                    if i % 2 == 0 else
                    f"Actually my {other} question can wait.")
        requests.append({"pair_id": f"golden{i:02d}", "context": context,
                         "response": response,
                         "format": "plain" if i % 4 < 2 else "sep"})
    return requests


def record(config: BridgeConfig, path: Path | str) -> dict:
    tokenizer = load_tokenizer(config)
    model = build_model(config, tokenizer)
    requests = golden_requests()
    probs = score_requests(model, tokenizer, config, requests)
    payload = {
        "model_source": config.model_source,
        "seed": config.seed,
        "tolerance": TOLERANCE,
        "probabilities": {r["pair_id"]: p for r, p in zip(requests, probs)},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    return payload


def check(config: BridgeConfig, path: Path | str) -> dict:
    reference = json.loads(Path(path).read_text(encoding="utf-8"))
    tokenizer = load_tokenizer(config)
    model = build_model(config, tokenizer)
    requests = golden_requests()
    probs = score_requests(model, tokenizer, config, requests)
    tolerance = reference.get("tolerance", TOLERANCE)
    failures = {}
    for request, prob in zip(requests, probs):
        expected = reference["probabilities"][request["pair_id"]]
        if abs(prob - expected) > tolerance:
            failures[request["pair_id"]] = {"expected": expected, "got": prob}
    return {"ok": not failures, "failures": failures,
            "n_checked": len(requests)}
