"""Scripted bridge servers for tests: live n-gram serving, recording, replay.

The live handler produces exactly what a compliant server must: tokens at
or above min_score sorted by (score desc, id asc), capped, never empty
(top-1 fallback), scores as 18-significant-digit decimals.
"""

from __future__ import annotations

import json
from fractions import Fraction

from stegotext.lm import NGramModel
from stegotext.rationals import significant_decimal
from stegotext.vocab import Vocabulary


class BridgeRequestHandler:
    """Protocol state machine shared by the loopback, stdio, and TCP mocks."""

    def __init__(self, model: NGramModel, vocab_size: int, fingerprint: str, name="mock-ngram"):
        self.model = model
        self.vocab_size = vocab_size
        self.fingerprint = fingerprint
        self.name = name
        self.max_context: int | None = None

    def handle(self, request: dict) -> dict:
        rid = request.get("id")
        op = request.get("op")
        if op == "hello":
            if request.get("proto") != 1:
                return {"id": rid, "error": f"unsupported protocol {request.get('proto')!r}"}
            return {
                "id": rid,
                "vocab_size": self.vocab_size,
                "fingerprint": self.fingerprint,
                "model": self.name,
            }
        if op == "dist":
            context = request.get("context", [])
            if self.max_context is not None and len(context) > self.max_context:
                return {"id": rid, "error": "context too long"}
            min_score = Fraction(str(request.get("min_score", "0")))
            cap = int(request.get("max_candidates", 1 << 30))
            dist = self.model.distribution(context)
            ranked = sorted(
                ((token_id, score) for token_id, score in enumerate(dist.fractions())),
                key=lambda item: (-item[1], item[0]),
            )
            kept = [item for item in ranked if item[1] >= min_score][:cap] or ranked[:1]
            return {
                "id": rid,
                "tokens": [
                    {"id": token_id, "score": significant_decimal(score, 18)}
                    for token_id, score in kept
                ],
            }
        return {"id": rid, "error": f"unknown op {op!r}"}

    def handle_line(self, line: bytes) -> bytes:
        try:
            request = json.loads(line)
        except ValueError:
            reply = {"id": None, "error": "malformed request"}
        else:
            reply = self.handle(request)
        return json.dumps(reply, separators=(",", ":")).encode()


class LoopbackTransport:
    """In-process transport: each sent line is answered synchronously."""

    def __init__(self, handler: BridgeRequestHandler):
        self.handler = handler
        self._pending: list[bytes] = []

    def send_line(self, line: bytes) -> None:
        self._pending.append(self.handler.handle_line(line))

    def recv_line(self) -> bytes:
        return self._pending.pop(0)

    def close(self) -> None:
        self._pending.clear()


class ScriptedTransport:
    """Replays a fixed list of response lines regardless of the requests."""

    def __init__(self, responses: list[bytes]):
        self._responses = list(responses)

    def send_line(self, line: bytes) -> None:
        pass

    def recv_line(self) -> bytes:
        return self._responses.pop(0)

    def close(self) -> None:
        pass


def _request_key(line: bytes) -> str:
    body = json.loads(line)
    body.pop("id", None)
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


class RecordingTransport:
    """Wraps a transport and records id-normalized request/response pairs."""

    def __init__(self, inner):
        self.inner = inner
        self.recorded: dict[str, str] = {}
        self._last_key: str | None = None

    def send_line(self, line: bytes) -> None:
        self._last_key = _request_key(line)
        self.inner.send_line(line)

    def recv_line(self) -> bytes:
        line = self.inner.recv_line()
        body = json.loads(line)
        body.pop("id", None)
        self.recorded[self._last_key] = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return line

    def close(self) -> None:
        self.inner.close()


class ReplayTransport:
    """Serves recorded responses; deterministic servers make this exact."""

    def __init__(self, recorded: dict[str, str]):
        self.recorded = dict(recorded)
        self._pending: list[bytes] = []

    def send_line(self, line: bytes) -> None:
        rid = json.loads(line).get("id")
        body = json.loads(self.recorded[_request_key(line)])
        body["id"] = rid
        self._pending.append(json.dumps(body, separators=(",", ":")).encode())

    def recv_line(self) -> bytes:
        return self._pending.pop(0)

    def close(self) -> None:
        self._pending.clear()


def handler_for_files(vocab_path, model_path) -> BridgeRequestHandler:
    import hashlib

    from stegotext.lm import load_model

    data = open(vocab_path, "rb").read()
    from stegotext.vocab import vocabulary_from_bytes

    vocab = vocabulary_from_bytes(data)
    model = load_model(model_path)
    return BridgeRequestHandler(
        model, len(vocab), hashlib.sha256(data).hexdigest(), name="mock-ngram"
    )
