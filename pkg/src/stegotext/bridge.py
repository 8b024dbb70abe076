"""Client for external LM servers speaking the newline-delimited JSON protocol.

The wire carries one JSON object per line, UTF-8, with monotonically
increasing request ids that responses must echo:

    -> {"id":1,"op":"hello","proto":1}
    <- {"id":1,"vocab_size":V,"fingerprint":"<sha256 hex>","model":"<name>"}
    -> {"id":2,"op":"dist","context":[...],"min_score":"<decimal>","max_candidates":K}
    <- {"id":2,"tokens":[{"id":t,"score":"<decimal>"},...]}   (>= 1 entry)
    <- {"id":N,"error":"<message>"}                           (on failure)

Scores are decimal strings of 18 significant digits; the client parses
them back to exact rationals, so ranking agreement with an in-process
model holds whenever the model's true score gaps exceed the wire
precision (always true for the bundled n-gram models). The handshake
fingerprint is the SHA-256 of the canonical vocabulary file, which pins
both parties to byte-identical vocabularies before any step runs.
"""

from __future__ import annotations

import json
import selectors
import socket
import subprocess
import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    BridgeProtocolError,
    BridgeServerError,
    BridgeTimeoutError,
    ConfigError,
    InsufficientCandidatesError,
    VocabularyMismatchError,
)
from .lm import SparseDistribution
from .rationals import significant_decimal
from .vocab import Vocabulary, vocabulary_fingerprint

WIRE_PROTO = 1
SCORE_DIGITS = 18


@dataclass(frozen=True)
class BridgeConfig:
    """Transport and cutoff settings for one server connection."""

    timeout_ms: int = 10_000
    min_score: Fraction = Fraction(1, 200)
    max_candidates: int = 4096

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if not 0 <= self.min_score < 1:
            raise ConfigError("min_score must be in [0, 1)")
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1")


class StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command, timeout_ms: int):
        self._timeout = timeout_ms / 1000.0
        self._proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        self._buffer = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def send_line(self, line: bytes) -> None:
        self._proc.stdin.write(line + b"\n")
        self._proc.stdin.flush()

    def recv_line(self) -> bytes:
        deadline = time.monotonic() + self._timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0 or not self._selector.select(remaining):
                raise BridgeTimeoutError("timed out waiting for the server")
            chunk = self._proc.stdout.read1(65536)
            if not chunk:
                raise BridgeProtocolError("server closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        self._selector.close()
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class TcpTransport:
    """Line transport over a TCP socket."""

    def __init__(self, host: str, port: int, timeout_ms: int):
        self._sock = socket.create_connection((host, port), timeout=timeout_ms / 1000.0)
        self._buffer = b""

    def send_line(self, line: bytes) -> None:
        self._sock.sendall(line + b"\n")

    def recv_line(self) -> bytes:
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except (socket.timeout, TimeoutError):
                raise BridgeTimeoutError("timed out waiting for the server") from None
            if not chunk:
                raise BridgeProtocolError("server closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        self._sock.close()


class BridgeModel:
    """NextTokenModel backed by a bridge server.

    One in-flight request per connection; concurrent codec runs need
    separate connections. `score_floor` equals the configured min_score
    so the codec can refuse thresholds the server response cannot cover.
    """

    def __init__(self, transport, vocab: Vocabulary, config: BridgeConfig = BridgeConfig()):
        self._transport = transport
        self._config = config
        self._next_id = 0
        self._min_score_wire = significant_decimal(
            config.min_score, SCORE_DIGITS, rounding="floor"
        )
        self.vocab_size = len(vocab)
        self.score_floor = config.min_score
        self.context_size = None
        reply = self._roundtrip({"op": "hello", "proto": WIRE_PROTO})
        if reply.get("vocab_size") != len(vocab):
            raise VocabularyMismatchError(
                f"vocabulary mismatch: server has {reply.get('vocab_size')} tokens, "
                f"client has {len(vocab)}"
            )
        fingerprint = vocabulary_fingerprint(vocab)
        if reply.get("fingerprint") != fingerprint:
            raise VocabularyMismatchError(
                f"vocabulary mismatch: server fingerprint {reply.get('fingerprint')!r} "
                f"!= client fingerprint {fingerprint!r}"
            )
        self.model_name = reply.get("model", "")

    def _roundtrip(self, payload: dict) -> dict:
        self._next_id += 1
        request = {"id": self._next_id, **payload}
        self._transport.send_line(json.dumps(request, separators=(",", ":")).encode())
        line = self._transport.recv_line()
        try:
            reply = json.loads(line)
        except ValueError:
            raise BridgeProtocolError(f"malformed response: {line[:200]!r}") from None
        if not isinstance(reply, dict):
            raise BridgeProtocolError("malformed response: expected an object")
        if reply.get("id") != self._next_id:
            raise BridgeProtocolError(
                f"response id {reply.get('id')!r} does not echo request id {self._next_id}"
            )
        if "error" in reply:
            raise BridgeServerError(str(reply["error"]))
        return reply

    def distribution(self, context) -> SparseDistribution:
        reply = self._roundtrip(
            {
                "op": "dist",
                "context": list(context),
                "min_score": self._min_score_wire,
                "max_candidates": self._config.max_candidates,
            }
        )
        entries = reply.get("tokens")
        if not isinstance(entries, list):
            raise BridgeProtocolError("malformed response: missing token list")
        if not entries:
            raise InsufficientCandidatesError(
                "insufficient candidates: the server returned no tokens"
            )
        scores: dict[int, Fraction] = {}
        for entry in entries:
            if not isinstance(entry, dict) or "id" not in entry or "score" not in entry:
                raise BridgeProtocolError("malformed response: bad token entry")
            token_id = entry["id"]
            if not isinstance(token_id, int) or not 0 <= token_id < self.vocab_size:
                raise BridgeProtocolError(f"malformed response: token id {token_id!r}")
            if token_id in scores:
                raise BridgeProtocolError(f"malformed response: duplicate token id {token_id}")
            try:
                score = Fraction(str(entry["score"]))
            except (ValueError, ZeroDivisionError):
                raise BridgeProtocolError(
                    f"malformed response: bad score {entry['score']!r}"
                ) from None
            if score < 0:
                raise BridgeProtocolError(f"malformed response: negative score for {token_id}")
            scores[token_id] = score
        return SparseDistribution(scores, self.vocab_size)

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_stdio(command, vocab: Vocabulary, config: BridgeConfig = BridgeConfig()) -> BridgeModel:
    return BridgeModel(StdioTransport(command, config.timeout_ms), vocab, config)


def connect_tcp(
    host: str, port: int, vocab: Vocabulary, config: BridgeConfig = BridgeConfig()
) -> BridgeModel:
    return BridgeModel(TcpTransport(host, port, config.timeout_ms), vocab, config)
