"""Protocol stub used by the test suite in place of a real external scorer.

Speaks the newline-delimited JSON wire protocol on stdin/stdout. Scoring is
deterministic: word overlap between response and (joined) context, squashed
into (0, 1). Flags let tests force misbehavior (fixed values, out-of-range
probabilities). count_tokens reports whitespace token counts.
"""

import argparse
import json
import sys


def join_context(context, fmt):
    if fmt == "sep":
        return " | ".join(context)
    return " ".join(context)


def score(context_text, response):
    resp = set(response.split())
    if not resp:
        return 0.0
    ctx = set(context_text.split())
    return 0.05 + 0.9 * (len(resp & ctx) / len(resp))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixed", type=float, default=None,
                        help="always reply with this probability")
    args = parser.parse_args()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            print(json.dumps({"error": "bad json"}), flush=True)
            continue
        if request.get("op") == "count_tokens":
            count = len(str(request.get("text", "")).split())
            print(json.dumps({"count": count}), flush=True)
            continue
        if "pair_id" not in request or "response" not in request:
            print(json.dumps({"error": "missing fields"}), flush=True)
            continue
        if args.fixed is not None:
            prob = args.fixed
        else:
            ctx = join_context(request.get("context", []),
                               request.get("format", "plain"))
            prob = score(ctx, request["response"])
        print(json.dumps({"pair_id": request["pair_id"], "prob": prob}),
              flush=True)


if __name__ == "__main__":
    main()
