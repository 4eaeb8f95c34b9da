"""Client for external scorers speaking the newline-delimited JSON protocol.

Requests go to the child process's stdin, one JSON object per line:

    {"pair_id": ..., "context": [5 strings], "response": ..., "format": "plain"|"sep"}

and each reply line is {"pair_id": ..., "prob": float}, order-preserving.
"plain" asks the scorer to join the context sentences with spaces; "sep" asks
it to join them with its separator token. The extra verb
{"op": "count_tokens", "text": ...} -> {"count": N} exposes the scorer's own
tokenizer so interval segmentation can use matching token counts.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from typing import Sequence

from ..dataset import ContextResponsePair
from ..errors import ProbabilityOutOfRange, ProtocolError, ScorerTimeout
from ..tokenizer import ExternalTokenCounter

FORMATS = ("plain", "sep")


class ExternalScorer:
    """Launches and talks to a scorer subprocess. Use as a context manager."""

    def __init__(self, command: Sequence[str], format: str = "plain",
                 timeout: float = 60.0, model_id: str = "external"):
        if format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        self.command = list(command)
        self.format = format
        self.timeout = timeout
        self.model_id = model_id
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._reader: threading.Thread | None = None
        self.token_counter = ExternalTokenCounter(self.count_tokens,
                                                  name=model_id)

    # -- process management -------------------------------------------------

    def start(self) -> "ExternalScorer":
        if self._proc is not None:
            return self
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        return self

    def _pump(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)   # EOF marker

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()
        self._proc = None

    def __enter__(self) -> "ExternalScorer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    # -- protocol ------------------------------------------------------------

    def _send(self, payload: dict) -> None:
        if self._proc is None:
            self.start()
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"scorer process pipe broke: {exc}") from exc

    def _recv(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeout(
                f"no response within {self.timeout}s from {self.command[0]}")
        if line is None:
            raise ProtocolError("scorer process closed its end of the pipe")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from scorer: {line!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"expected a JSON object, got {reply!r}")
        if "error" in reply:
            raise ProtocolError(f"scorer reported: {reply['error']}")
        return reply

    def predict_pairs(self, pairs: Sequence[ContextResponsePair]) -> dict:
        """Pipelined scoring: write all requests, then collect all replies."""
        for pair in pairs:
            self._send({
                "pair_id": pair.pair_id,
                "context": [s.text for s in pair.context],
                "response": pair.response.text,
                "format": self.format,
            })
        out: dict = {}
        for pair in pairs:
            reply = self._recv()
            if reply.get("pair_id") != pair.pair_id:
                raise ProtocolError(
                    f"out-of-order reply: expected {pair.pair_id}, "
                    f"got {reply.get('pair_id')}")
            prob = reply.get("prob")
            if not isinstance(prob, (int, float)) or isinstance(prob, bool):
                raise ProtocolError(f"non-numeric prob in {reply!r}")
            if not 0.0 <= prob <= 1.0:
                raise ProbabilityOutOfRange(
                    f"{pair.pair_id}: prob {prob} outside [0, 1]")
            out[pair.pair_id] = float(prob)
        return out

    def count_tokens(self, text: str) -> int:
        self._send({"op": "count_tokens", "text": text})
        reply = self._recv()
        count = reply.get("count")
        if not isinstance(count, int) or count < 0:
            raise ProtocolError(f"bad count_tokens reply: {reply!r}")
        return count

    def token_count(self, text: str) -> int:
        return self.token_counter.token_count(text)
