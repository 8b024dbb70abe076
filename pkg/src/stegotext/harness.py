"""Seeded benchmark trials: decoding error rate and payload capacity.

Each trial draws a fresh random message from the documented generator,
encodes it after the next corpus prompt, and runs the method's decoder.
A trial fails when the receiver does not land on exactly the sender's
tokens (for the unaware baseline even a lucky bit-identical decode counts
as a failure if the retokenization differs). Reports are canonical bytes:
the same config, prompts, and models always produce identical files, and
trials are independent so serial and parallel runs agree bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import repeat
from typing import Sequence

from .codec import METHOD_PROPOSED, METHOD_UNAWARE, BlockCodec, CodecParams
from .errors import (
    ConfigError,
    DesynchronizedError,
    TokenNotInCandidatesError,
    TruncatedCoverError,
)
from .lm import NextTokenModel
from .prng import PRNG_ID, trial_message_bits
from .rationals import decimal_string, format_ratio
from .vocab import Vocabulary, greedy_tokenize

KIND_RETOKENIZATION = "retokenization-mismatch"
KIND_CANDIDATE_MISS = "candidate-miss"
KIND_TRUNCATED = "truncated"
FAILURE_KINDS = (KIND_RETOKENIZATION, KIND_CANDIDATE_MISS, KIND_TRUNCATED)

EXEMPLAR_LIMIT = 5


@dataclass(frozen=True)
class TrialConfig:
    """Everything a rerun needs besides the corpus and models themselves."""

    trials: int
    seed: int
    msg_len_bits: int = 64
    p: Fraction = Fraction(1, 100)
    methods: tuple[str, ...] = (METHOD_PROPOSED, METHOD_UNAWARE)
    max_prompt_bytes: int | None = None
    prng_id: str = PRNG_ID

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in (METHOD_PROPOSED, METHOD_UNAWARE):
                raise ConfigError(f"unknown method: {m!r}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate methods")
        if self.prng_id != PRNG_ID:
            raise ConfigError(f"unknown prng_id: {self.prng_id!r} (supported: {PRNG_ID})")
        if self.max_prompt_bytes is not None and self.max_prompt_bytes < 0:
            raise ConfigError("max_prompt_bytes must be >= 0")


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    method: str
    success: bool
    failure_kind: str | None
    tokens_generated: int
    bits_embedded: int
    bits_per_token: Fraction
    sender_ids: tuple[int, ...]
    received_ids: tuple[int, ...] | None
    detail: str | None


@dataclass(frozen=True)
class MethodSummary:
    method: str
    trials: int
    failures: int
    error_rate_pct: Fraction
    bits_per_token_mean: Fraction
    failure_kinds: dict[str, int]
    protocol_violation: bool
    tokens_generated_total: int


@dataclass(frozen=True)
class TrialReport:
    config: TrialConfig
    prompts_available: int
    prompts_sha256: str
    prompt_wraparounds: int
    outcomes: tuple[TrialOutcome, ...]

    def summary(self, method: str) -> MethodSummary:
        rows = [o for o in self.outcomes if o.method == method]
        failures = [o for o in rows if not o.success]
        kinds = {kind: 0 for kind in FAILURE_KINDS}
        for o in failures:
            kinds[o.failure_kind] += 1
        return MethodSummary(
            method=method,
            trials=len(rows),
            failures=len(failures),
            error_rate_pct=Fraction(100 * len(failures), len(rows)),
            bits_per_token_mean=sum((o.bits_per_token for o in rows), Fraction(0))
            / len(rows),
            failure_kinds=kinds,
            protocol_violation=method == METHOD_PROPOSED and bool(failures),
            tokens_generated_total=sum(o.tokens_generated for o in rows),
        )


def load_prompts(corpus: bytes, max_prompt_bytes: int | None = None) -> list[bytes]:
    """One prompt per non-empty corpus line, optionally truncated."""
    prompts = [line.rstrip(b"\r") for line in corpus.split(b"\n")]
    prompts = [p for p in prompts if p]
    if max_prompt_bytes is not None:
        prompts = [p[:max_prompt_bytes] for p in prompts]
    return prompts


def _run_slice(
    indices: Sequence[int],
    config: TrialConfig,
    prompts: Sequence[bytes],
    lm: NextTokenModel,
    vocab: Vocabulary,
) -> list[TrialOutcome]:
    codecs = {
        method: BlockCodec(
            lm, vocab, CodecParams(p=config.p, method=method, msg_len_bits=config.msg_len_bits)
        )
        for method in config.methods
    }
    outcomes = []
    for i in indices:
        message = trial_message_bits(config.seed, i, config.msg_len_bits)
        prompt = prompts[i % len(prompts)]
        for method in config.methods:
            outcomes.append(_run_trial(i, method, codecs[method], message, prompt))
    return outcomes


def _run_trial(index: int, method: str, codec: BlockCodec, message, prompt: bytes) -> TrialOutcome:
    sent, cover, _ = codec.encode(message, prompt)
    sender_ids = tuple(t.id for t in sent)
    kind = None
    received = None
    detail = None
    if method == METHOD_PROPOSED:
        try:
            bits, consumed, trace = codec.decode_proposed(cover, prompt)
            received = tuple(r.chosen_id for r in trace)
            if bits != message:
                kind = KIND_RETOKENIZATION
                detail = "decoded bits differ from the message"
        except TruncatedCoverError as exc:
            kind, detail = KIND_TRUNCATED, str(exc)
        except (DesynchronizedError, TokenNotInCandidatesError) as exc:
            kind, detail = KIND_CANDIDATE_MISS, str(exc)
    else:
        try:
            bits, retokenized = codec.decode_unaware(cover, prompt)
            received = tuple(t.id for t in retokenized)
            if received != sender_ids:
                kind = KIND_RETOKENIZATION
                detail = "receiver retokenized the cover differently"
            elif len(bits) < len(message):
                kind = KIND_TRUNCATED
                detail = "cover exhausted before the full message"
            elif bits != message:
                kind = KIND_RETOKENIZATION
                detail = "decoded bits differ from the message"
        except TokenNotInCandidatesError as exc:
            kind, detail = KIND_CANDIDATE_MISS, str(exc)
            received = tuple(t.id for t in greedy_tokenize(cover, codec.vocab))
    return TrialOutcome(
        trial=index,
        method=method,
        success=kind is None,
        failure_kind=kind,
        tokens_generated=len(sent),
        bits_embedded=len(message),
        bits_per_token=Fraction(len(message), len(sent)),
        sender_ids=sender_ids,
        received_ids=received,
        detail=detail,
    )


def run_trials(
    config: TrialConfig,
    prompts: Sequence[bytes],
    lm: NextTokenModel,
    vocab: Vocabulary,
    workers: int = 1,
) -> TrialReport:
    """Run every (trial, method) pair and aggregate a deterministic report.

    `workers` only changes how the independent trials are scheduled; each
    trial derives its message from (seed, index), so any schedule produces
    the same outcomes.
    """
    prompts = list(prompts)
    if not prompts:
        raise ConfigError("corpus provides no prompts")
    if config.max_prompt_bytes is not None:
        prompts = [p[: config.max_prompt_bytes] for p in prompts]
    indices = range(config.trials)
    if workers > 1:
        step = -(-config.trials // workers)
        slices = [indices[k : k + step] for k in range(0, config.trials, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(
                _run_slice, slices, repeat(config), repeat(prompts), repeat(lm), repeat(vocab)
            )
            outcomes = [o for chunk in chunks for o in chunk]
    else:
        outcomes = _run_slice(indices, config, prompts, lm, vocab)
    return TrialReport(
        config=config,
        prompts_available=len(prompts),
        prompts_sha256=hashlib.sha256(b"\n".join(prompts)).hexdigest(),
        prompt_wraparounds=(config.trials - 1) // len(prompts),
        outcomes=tuple(outcomes),
    )


def _surface_text(vocab_surface: bytes) -> str:
    return vocab_surface.decode("utf-8", errors="backslashreplace")


def _exemplars(report: TrialReport, method: str, vocab: Vocabulary | None) -> list[dict]:
    rows = []
    for o in report.outcomes:
        if o.method != method or o.success:
            continue
        entry = {
            "trial": o.trial,
            "kind": o.failure_kind,
            "detail": o.detail,
            "sender_ids": list(o.sender_ids),
            "received_ids": list(o.received_ids) if o.received_ids is not None else None,
        }
        if vocab is not None:
            entry["sender"] = [_surface_text(vocab.surface(t)) for t in o.sender_ids]
            if o.received_ids is not None:
                entry["received"] = [_surface_text(vocab.surface(t)) for t in o.received_ids]
        rows.append(entry)
        if len(rows) == EXEMPLAR_LIMIT:
            break
    return rows


def report_document(report: TrialReport, vocab: Vocabulary | None = None) -> dict:
    """The report as a plain JSON-ready structure (exact rationals as strings)."""
    methods = {}
    for method in report.config.methods:
        s = report.summary(method)
        methods[method] = {
            "trials": s.trials,
            "failures": s.failures,
            "error_rate_pct": {
                "exact": format_ratio(s.error_rate_pct),
                "decimal": decimal_string(s.error_rate_pct, 4),
            },
            "bits_per_token_mean": {
                "exact": format_ratio(s.bits_per_token_mean),
                "decimal": decimal_string(s.bits_per_token_mean, 10),
            },
            "failure_kinds": s.failure_kinds,
            "protocol_violation": s.protocol_violation,
            "tokens_generated_total": s.tokens_generated_total,
            "exemplars": _exemplars(report, method, vocab),
        }
    return {
        "config": {
            "trials": report.config.trials,
            "seed": report.config.seed,
            "msg_len_bits": report.config.msg_len_bits,
            "p": format_ratio(report.config.p),
            "methods": list(report.config.methods),
            "max_prompt_bytes": report.config.max_prompt_bytes,
            "prng_id": report.config.prng_id,
        },
        "prompts": {
            "available": report.prompts_available,
            "sha256": report.prompts_sha256,
            "wraparounds": report.prompt_wraparounds,
        },
        "methods": methods,
    }


def emit_report(report: TrialReport, fmt: str = "json", vocab: Vocabulary | None = None) -> bytes:
    """Serialize canonically: sorted keys, no whitespace, exact + decimal values."""
    if fmt == "json":
        doc = report_document(report, vocab)
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    if fmt == "csv":
        lines = ["method,error_rate_pct,bits_per_token,trials,seed"]
        for method in report.config.methods:
            s = report.summary(method)
            lines.append(
                ",".join(
                    [
                        method,
                        decimal_string(s.error_rate_pct, 4),
                        decimal_string(s.bits_per_token_mean, 10),
                        str(s.trials),
                        str(report.config.seed),
                    ]
                )
            )
        return ("\n".join(lines) + "\n").encode()
    raise ConfigError(f"unknown report format: {fmt!r}")
