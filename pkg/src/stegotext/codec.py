"""Block encoding over a shared LM, with and without segmentation-ambiguity handling.

The sender thresholds the next-token distribution at p, sorts the
survivors, assigns fixed-width bit chunks to the top 2**n, and emits the
token matching the next n message bits. The ambiguity-unaware receiver
retokenizes the cover with an off-the-shelf tokenizer and can desync; the
proposed receiver replays the sender's loop stepwise and relies on the
candidate set being prefix-free, which `disambiguate` guarantees.

Both parties must run the exact same candidate pipeline, in this fixed
order: threshold filter, prefix removal (proposed method only), block
size from the survivor count, truncation to the top 2**n.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from .bits import Bits, bits_from_int, bits_to_int
from .errors import (
    ConfigError,
    DesynchronizedError,
    EncodingStalledError,
    TokenNotInCandidatesError,
    TruncatedCoverError,
)
from .lm import NextTokenModel
from .vocab import Token, Vocabulary, detokenize, greedy_tokenize

METHOD_PROPOSED = "proposed"
METHOD_UNAWARE = "unaware"

# Forced (zero-bit) steps keep both sides in sync but make no progress;
# a run this long means the model cannot embed the message at this p.
STALL_LIMIT = 4096


@dataclass(frozen=True)
class CodecParams:
    """Protocol parameters both parties must share out of band."""

    p: Fraction = Fraction(1, 100)
    method: str = METHOD_PROPOSED
    msg_len_bits: int = 64

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ConfigError(f"threshold p must be in [0, 1), got {self.p}")
        if self.method not in (METHOD_PROPOSED, METHOD_UNAWARE):
            raise ConfigError(f"unknown method: {self.method!r}")
        if self.msg_len_bits < 1:
            raise ConfigError("msg_len_bits must be >= 1")


@dataclass(frozen=True)
class Candidate:
    """One thresholded next-token option, ranked by (score desc, id asc)."""

    token_id: int
    surface: bytes
    score: Fraction
    rank: int


@dataclass(frozen=True)
class StepRecord:
    """Audit of one generation step, identical on both sides of a clean run."""

    step: int
    before_ids: tuple[int, ...]
    after_ids: tuple[int, ...]
    n: int
    chosen_id: int
    bits: Bits


def candidate_filter(dist, vocab: Vocabulary, p: Fraction) -> list[Candidate]:
    """Tokens scoring >= p, sorted by (score desc, id asc) with ranks assigned.

    If nothing reaches p, fall back to the single most probable token so a
    step always has a candidate (it then carries zero message bits).
    """
    pairs = dist.candidates_ge(p)
    if not pairs:
        pairs = [dist.best()]
    pairs.sort(key=lambda item: (-item[1], item[0]))
    return [
        Candidate(token_id, vocab.surface(token_id), score, rank)
        for rank, (token_id, score) in enumerate(pairs)
    ]


def disambiguate(candidates: Sequence[Candidate]) -> list[Candidate]:
    """Drop every candidate whose surface byte-prefixes another candidate's.

    Equal surfaces count as mutual prefixes; only the highest-ranked twin
    survives. Survivors keep their relative order and are re-ranked
    densely, so the result is prefix-free and non-empty (a longest surface
    always survives).
    """
    kept: list[Candidate] = []
    for c in candidates:
        dominated = False
        for other in candidates:
            if other is c:
                continue
            if c.surface == other.surface:
                if c.rank > other.rank:
                    dominated = True
                    break
            elif other.surface.startswith(c.surface):
                dominated = True
                break
        if not dominated:
            kept.append(c)
    return [replace(c, rank=i) for i, c in enumerate(kept)]


def block_size(count: int) -> int:
    """Largest n with 2**n <= count; 0 for a forced single candidate."""
    if count < 1:
        raise ValueError("empty candidate set")
    return count.bit_length() - 1


def assign_chunks(candidates: Sequence[Candidate], n: int) -> dict[Bits, Candidate]:
    """Bijection from the 2**n possible n-bit chunks to the top 2**n candidates.

    Chunk value i (read MSB-first) maps to the rank-i candidate; candidates
    beyond rank 2**n - 1 receive no chunk and can never be emitted.
    """
    if len(candidates) < (1 << n):
        raise ValueError(f"need at least 2**{n} candidates, got {len(candidates)}")
    return {bits_from_int(i, n): candidates[i] for i in range(1 << n)}


class _StepPlan:
    """Cached per-context result of the shared candidate pipeline."""

    __slots__ = ("filtered_ids", "survivor_ids", "_unaware_ranks")

    def __init__(self, filtered: Sequence[Candidate], survivors: Sequence[Candidate]):
        self.filtered_ids = array("l", (c.token_id for c in filtered))
        self.survivor_ids = array("l", (c.token_id for c in survivors))
        self._unaware_ranks: dict[int, int] | None = None

    def ranked_ids(self, method: str) -> array:
        return self.survivor_ids if method == METHOD_PROPOSED else self.filtered_ids

    def unaware_rank(self, token_id: int) -> int | None:
        if self._unaware_ranks is None:
            n = block_size(len(self.filtered_ids))
            self._unaware_ranks = {
                tid: i for i, tid in enumerate(self.filtered_ids[: 1 << n])
            }
        return self._unaware_ranks.get(token_id)


class BlockCodec:
    """Encoder/decoder pair bound to one (model, vocabulary, params) triple.

    Stateless apart from a per-context plan cache, so one instance can
    serve many messages; encode and decode share cached candidate sets.
    """

    def __init__(self, lm: NextTokenModel, vocab: Vocabulary, params: CodecParams):
        if lm.vocab_size != len(vocab):
            raise ConfigError(
                f"model vocab_size {lm.vocab_size} != vocabulary size {len(vocab)}"
            )
        floor = getattr(lm, "score_floor", None)
        if floor is not None and floor > params.p:
            raise ConfigError(
                f"model score floor {floor} exceeds threshold p {params.p}; "
                "candidates the codec needs could be missing"
            )
        self.lm = lm
        self.vocab = vocab
        self.params = params
        self._plans: dict[tuple[int, ...], _StepPlan] = {}

    def _plan(self, context: list[int]) -> _StepPlan:
        size = self.lm.context_size
        if size is None:
            key = tuple(context)
        else:
            key = tuple(context[-size:]) if size else ()
        plan = self._plans.get(key)
        if plan is None:
            dist = self.lm.distribution(context)
            filtered = candidate_filter(dist, self.vocab, self.params.p)
            survivors = disambiguate(filtered)
            plan = self._plans[key] = _StepPlan(filtered, survivors)
        return plan

    def _record(
        self, step: int, plan: _StepPlan, n: int, chosen_id: int, bits: Bits
    ) -> StepRecord:
        after = plan.survivor_ids if self.params.method == METHOD_PROPOSED else plan.filtered_ids
        return StepRecord(step, tuple(plan.filtered_ids), tuple(after), n, chosen_id, bits)

    def encode(self, message: Bits, prompt: bytes) -> tuple[list[Token], bytes, list[StepRecord]]:
        """Embed `message` after `prompt`; returns (tokens, cover bytes, trace).

        Generation stops as soon as the final message bit is consumed; the
        last chunk is right-padded with zero bits if the message runs out
        mid-chunk. The prompt is not part of the cover.
        """
        if len(message) != self.params.msg_len_bits:
            raise ConfigError(
                f"message has {len(message)} bits, params say {self.params.msg_len_bits}"
            )
        context = [t.id for t in greedy_tokenize(prompt, self.vocab)]
        out: list[Token] = []
        trace: list[StepRecord] = []
        pos = 0
        stalled = 0
        while pos < len(message):
            plan = self._plan(context)
            ranked = plan.ranked_ids(self.params.method)
            n = block_size(len(ranked))
            if n == 0:
                stalled += 1
                if stalled > STALL_LIMIT:
                    raise EncodingStalledError(
                        f"{STALL_LIMIT} consecutive forced steps; "
                        "the model cannot embed bits at this threshold"
                    )
                chosen_id = ranked[0]
                consumed: Bits = ()
            else:
                stalled = 0
                consumed = message[pos : pos + n]
                chunk = tuple(consumed) + (0,) * (n - len(consumed))
                chosen_id = ranked[bits_to_int(chunk)]
                pos += len(consumed)
            trace.append(self._record(len(trace), plan, n, chosen_id, consumed))
            context.append(chosen_id)
            out.append(self.vocab.tokens[chosen_id])
        return out, detokenize(out), trace

    def decode_proposed(self, cover: bytes, prompt: bytes) -> tuple[Bits, int, list[StepRecord]]:
        """Stepwise-tokenize `cover`, replaying the sender's candidate pipeline.

        At each step exactly one top-2**n candidate surface byte-prefixes
        the remaining cover (the set is prefix-free); its chunk yields the
        next bits. Returns (bits, cover bytes consumed, trace).
        """
        if self.params.method != METHOD_PROPOSED:
            raise ConfigError("decode_proposed requires method='proposed'")
        context = [t.id for t in greedy_tokenize(prompt, self.vocab)]
        bits: list[int] = []
        trace: list[StepRecord] = []
        consumed = 0
        want = self.params.msg_len_bits
        while len(bits) < want:
            remaining = cover[consumed:]
            if not remaining:
                raise TruncatedCoverError(
                    f"truncated cover: {len(bits)} of {want} bits recovered"
                )
            plan = self._plan(context)
            ranked = plan.survivor_ids
            n = block_size(len(ranked))
            match_rank = -1
            for rank in range(1 << n):
                if remaining.startswith(self.vocab.surface(ranked[rank])):
                    match_rank = rank
                    break
            if match_rank < 0:
                raise DesynchronizedError(
                    f"desynchronized at byte {consumed}: no candidate matches the cover"
                )
            chosen_id = ranked[match_rank]
            step_bits = bits_from_int(match_rank, n)[: want - len(bits)]
            bits.extend(step_bits)
            trace.append(self._record(len(trace), plan, n, chosen_id, tuple(step_bits)))
            consumed += len(self.vocab.surface(chosen_id))
            context.append(chosen_id)
        return tuple(bits), consumed, trace

    def decode_unaware(self, cover: bytes, prompt: bytes) -> tuple[Bits, list[Token]]:
        """The flawed baseline: retokenize the cover, then look chunks up.

        Whatever the off-the-shelf tokenizer produced is trusted; if it
        differs from the sender's tokens the bits come out wrong, or a
        token misses the candidate set entirely.
        """
        if self.params.method != METHOD_UNAWARE:
            raise ConfigError("decode_unaware requires method='unaware'")
        retokenized = greedy_tokenize(cover, self.vocab)
        context = [t.id for t in greedy_tokenize(prompt, self.vocab)]
        bits: list[int] = []
        want = self.params.msg_len_bits
        for token in retokenized:
            if len(bits) >= want:
                break
            plan = self._plan(context)
            n = block_size(len(plan.filtered_ids))
            if n > 0:
                rank = plan.unaware_rank(token.id)
                if rank is None:
                    raise TokenNotInCandidatesError(
                        f"token not in candidate set: id {token.id} at bit {len(bits)}"
                    )
                bits.extend(bits_from_int(rank, n)[: want - len(bits)])
            elif token.id != plan.filtered_ids[0]:
                raise TokenNotInCandidatesError(
                    f"token not in candidate set: id {token.id} at forced step"
                )
            context.append(token.id)
        return tuple(bits), retokenized


def encode(
    message: Bits, prompt: bytes, lm: NextTokenModel, vocab: Vocabulary, params: CodecParams
) -> tuple[list[Token], bytes, list[StepRecord]]:
    return BlockCodec(lm, vocab, params).encode(message, prompt)


def decode_proposed(
    cover: bytes, prompt: bytes, lm: NextTokenModel, vocab: Vocabulary, params: CodecParams
) -> tuple[Bits, int, list[StepRecord]]:
    return BlockCodec(lm, vocab, params).decode_proposed(cover, prompt)


def decode_unaware(
    cover: bytes, prompt: bytes, lm: NextTokenModel, vocab: Vocabulary, params: CodecParams
) -> tuple[Bits, list[Token]]:
    return BlockCodec(lm, vocab, params).decode_unaware(cover, prompt)
