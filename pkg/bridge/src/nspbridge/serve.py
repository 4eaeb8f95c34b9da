"""Long-running wire-protocol responder on stdin/stdout.

One JSON object per line in, one per line out, strictly in order. Malformed
requests produce {"error": ...} lines and never crash the process. The
count_tokens verb reports this scorer's own token counts so callers can
segment conversations with a matching tokenizer.
"""

from __future__ import annotations

import json
import sys

from .models import BridgeConfig, build_model, load_tokenizer
from .scoring import score_requests


def handle_line(line: str, model, tokenizer, config: BridgeConfig) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError:
        return {"error": "invalid json"}
    if not isinstance(request, dict):
        return {"error": "request must be an object"}

    if request.get("op") == "count_tokens":
        text = request.get("text")
        if not isinstance(text, str):
            return {"error": "count_tokens needs a string 'text'"}
        return {"count": len(tokenizer.encode(text, add_special_tokens=False))}

    context = request.get("context")
    response = request.get("response")
    if "pair_id" not in request:
        return {"error": "missing pair_id"}
    if not isinstance(context, list) or \
            not all(isinstance(s, str) for s in context):
        return {"error": "context must be a list of strings",
                "pair_id": request["pair_id"]}
    if not isinstance(response, str):
        return {"error": "response must be a string",
                "pair_id": request["pair_id"]}
    fmt = request.get("format", config.format)
    if fmt not in ("plain", "sep"):
        return {"error": f"unknown format {fmt!r}", "pair_id": request["pair_id"]}
    prob = score_requests(model, tokenizer, config,
                          [{**request, "format": fmt}])[0]
    return {"pair_id": request["pair_id"], "prob": prob}


def serve(config: BridgeConfig, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    tokenizer = load_tokenizer(config)
    model = build_model(config, tokenizer)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        reply = handle_line(line, model, tokenizer, config)
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
