"""Sequence building and batched NSP scoring.

Input layout follows the classification convention:

    plain: [CLS] s1 s2 s3 s4 s5 [SEP] response [SEP]
    sep:   [CLS] s1 [SEP] s2 [SEP] ... s5 [SEP] response [SEP]

with token type 0 over the context segment and 1 over the response. The
NSP head's first logit corresponds to "response truly follows"; p(true) is
its softmax probability. Sequences are truncated to the token budget from
the context side, keeping the response intact.
"""

from __future__ import annotations

from typing import Sequence

import torch

from .models import BridgeConfig


def build_token_ids(tokenizer, context: Sequence[str], response: str,
                    fmt: str, max_tokens: int) -> tuple:
    cls_id = tokenizer.cls_token_id
    sep_id = tokenizer.sep_token_id

    def ids(text):
        return tokenizer.encode(text, add_special_tokens=False)

    if fmt == "sep":
        ctx_ids: list = []
        for sentence in context:
            ctx_ids.extend(ids(sentence))
            ctx_ids.append(sep_id)
        if ctx_ids:
            ctx_ids.pop()            # final separator re-added below
    else:
        ctx_ids = ids(" ".join(context))
    resp_ids = ids(response)

    # Budget: [CLS] ctx [SEP] resp [SEP]; drop oldest context tokens first.
    budget = max_tokens - 3 - len(resp_ids)
    if budget < 0:
        resp_ids = resp_ids[: max_tokens - 3]
        budget = 0
    ctx_ids = ctx_ids[-budget:] if budget else []

    input_ids = [cls_id] + ctx_ids + [sep_id] + resp_ids + [sep_id]
    type_ids = [0] * (2 + len(ctx_ids)) + [1] * (len(resp_ids) + 1)
    return input_ids, type_ids


@torch.no_grad()
def score_batch(model, tokenizer, config: BridgeConfig,
                requests: Sequence[dict]) -> list:
    """p(response follows context) for a batch of wire-protocol requests."""
    pad_id = tokenizer.pad_token_id
    encoded = [build_token_ids(tokenizer, r["context"], r["response"],
                               r.get("format", config.format),
                               config.max_tokens)
               for r in requests]
    width = max(len(ids) for ids, _ in encoded)
    input_ids = torch.full((len(encoded), width), pad_id, dtype=torch.long)
    type_ids = torch.zeros((len(encoded), width), dtype=torch.long)
    mask = torch.zeros((len(encoded), width), dtype=torch.long)
    for i, (ids, types) in enumerate(encoded):
        input_ids[i, :len(ids)] = torch.tensor(ids)
        type_ids[i, :len(types)] = torch.tensor(types)
        mask[i, :len(ids)] = 1
    out = model(input_ids=input_ids.to(config.device),
                token_type_ids=type_ids.to(config.device),
                attention_mask=mask.to(config.device))
    probs = torch.softmax(out.logits, dim=-1)[:, 0]
    return [float(p) for p in probs.cpu()]


def score_requests(model, tokenizer, config: BridgeConfig,
                   requests: Sequence[dict]) -> list:
    results: list = []
    for start in range(0, len(requests), config.batch_size):
        results.extend(score_batch(model, tokenizer, config,
                                   requests[start: start + config.batch_size]))
    return results
