"""Deterministic next-token models with exact rational scores.

Both parties must rank candidate tokens identically on any platform, so
the query path is integer arithmetic throughout: a dense distribution is
a vector of integer numerators over one shared denominator. Floats never
touch scores.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ModelError

MODEL_FORMAT_VERSION = 1

_INT64_LIMIT = 1 << 63


class DenseDistribution:
    """Scores for every token id, exactly normalized (numerators sum to the denominator)."""

    __slots__ = ("_nums", "_den", "_np")

    def __init__(self, nums, den: int, np_array: np.ndarray | None = None):
        self._nums = nums  # list[int] | np.ndarray(int64)
        self._den = den
        self._np = np_array

    @property
    def vocab_size(self) -> int:
        return len(self._nums)

    @property
    def denominator(self) -> int:
        return self._den

    def fraction(self, token_id: int) -> Fraction:
        return Fraction(int(self._nums[token_id]), self._den)

    def fractions(self) -> list[Fraction]:
        return [Fraction(int(n), self._den) for n in self._nums]

    def total(self) -> Fraction:
        return Fraction(int(sum(int(n) for n in self._nums)), self._den)

    def candidates_ge(self, threshold: Fraction) -> list[tuple[int, Fraction]]:
        """All (id, score) with score >= threshold, in id order."""
        # ceil(threshold * den) compared against integer numerators
        thr = -((-threshold.numerator * self._den) // threshold.denominator)
        if self._np is not None:
            ids = np.nonzero(self._np >= thr)[0]
            return [(int(i), Fraction(int(self._np[i]), self._den)) for i in ids]
        return [
            (i, Fraction(n, self._den)) for i, n in enumerate(self._nums) if n >= thr
        ]

    def best(self) -> tuple[int, Fraction]:
        """Highest-scoring token; ties resolve to the smallest id."""
        if self._np is not None:
            i = int(np.argmax(self._np))
            return i, Fraction(int(self._np[i]), self._den)
        best_id, best_num = 0, self._nums[0]
        for i, n in enumerate(self._nums):
            if n > best_num:
                best_id, best_num = i, n
        return best_id, Fraction(best_num, self._den)


class SparseDistribution:
    """Scores for a subset of token ids; absent ids are exactly zero.

    Produced by the bridge client, which only sees tokens above the server
    cutoff. Safe for the codec whenever the cutoff is at or below p.
    """

    __slots__ = ("scores", "_vocab_size")

    def __init__(self, scores: dict[int, Fraction], vocab_size: int):
        self.scores = scores
        self._vocab_size = vocab_size

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def fraction(self, token_id: int) -> Fraction:
        return self.scores.get(token_id, Fraction(0))

    def candidates_ge(self, threshold: Fraction) -> list[tuple[int, Fraction]]:
        return sorted(
            (item for item in self.scores.items() if item[1] >= threshold)
        )

    def best(self) -> tuple[int, Fraction]:
        if not self.scores:
            raise ModelError("empty distribution")
        return max(self.scores.items(), key=lambda kv: (kv[1], -kv[0]))


@runtime_checkable
class NextTokenModel(Protocol):
    """Shared contract between the codec and any language model.

    `distribution(context)` must be pure and exactly normalized (or, for
    partial models, a subset of such a distribution with `score_floor` as
    the omission cutoff). `context_size` bounds how much trailing context
    can influence scores; None means unbounded.
    """

    vocab_size: int
    score_floor: Fraction | None
    context_size: int | None

    def distribution(self, context: Sequence[int]) -> DenseDistribution | SparseDistribution: ...


class NGramModel:
    """Interpolated add-one n-gram model queried in exact arithmetic.

    For the longest stored context suffix downward, score(t) =
    (count(ctx -> t) + backoff(t)) / (total(ctx) + 1); the recursion
    bottoms out at the uniform distribution. Levels with no stored counts
    contribute nothing (they reduce to the identity), so the whole vector
    is a chain of integer updates over one running denominator.
    """

    def __init__(self, order: int, vocab_size: int, counts: dict[tuple[int, ...], dict[int, int]]):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        self.order = order
        self.vocab_size = vocab_size
        self.counts = {
            ctx: dict(next_counts) for ctx, next_counts in counts.items() if next_counts or ctx == ()
        }
        self.counts.setdefault((), {})
        self._validate()
        self._totals = {ctx: sum(m.values()) for ctx, m in self.counts.items()}
        self._arrays: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        self.score_floor: Fraction | None = None
        self.context_size = order - 1

    def _validate(self) -> None:
        for ctx, next_counts in self.counts.items():
            if len(ctx) >= self.order:
                raise ModelError(f"context {ctx} too long for order {self.order}")
            for t in ctx:
                if not 0 <= t < self.vocab_size:
                    raise ModelError(f"context id {t} out of range")
            if ctx and ctx[1:] not in self.counts:
                raise ModelError(f"missing backoff context for {ctx}")
            for t, c in next_counts.items():
                if not 0 <= t < self.vocab_size:
                    raise ModelError(f"token id {t} out of range")
                if not isinstance(c, int) or c <= 0:
                    raise ModelError(f"non-positive count for {ctx} -> {t}")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, NGramModel)
            and self.order == other.order
            and self.vocab_size == other.vocab_size
            and self.counts == other.counts
        )

    def _level_arrays(self, ctx: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        cached = self._arrays.get(ctx)
        if cached is None:
            next_counts = self.counts[ctx]
            ids = np.fromiter(next_counts.keys(), dtype=np.int64, count=len(next_counts))
            cnts = np.fromiter(next_counts.values(), dtype=np.int64, count=len(next_counts))
            cached = self._arrays[ctx] = (ids, cnts)
        return cached

    def distribution(self, context: Sequence[int]) -> DenseDistribution:
        suffix = tuple(context[-self.context_size :]) if self.context_size else ()
        levels = []
        den = self.vocab_size
        for m in range(len(suffix) + 1):
            ctx = suffix[len(suffix) - m :]
            total = self._totals.get(ctx, 0)
            if total:
                levels.append(ctx)
                den *= total + 1
        if den < _INT64_LIMIT:
            nums = np.ones(self.vocab_size, dtype=np.int64)
            d = self.vocab_size
            for ctx in levels:
                ids, cnts = self._level_arrays(ctx)
                nums[ids] += cnts * d
                d *= self._totals[ctx] + 1
            return DenseDistribution(nums, den, np_array=nums)
        nums_py = [1] * self.vocab_size
        d = self.vocab_size
        for ctx in levels:
            for t, c in self.counts[ctx].items():
                nums_py[t] += c * d
            d *= self._totals[ctx] + 1
        return DenseDistribution(nums_py, den)


def train_ngram(corpus_tokens: Sequence[int], order: int, vocab_size: int) -> NGramModel:
    """Accumulate sliding-window counts for every context length below `order`."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    counts: dict[tuple[int, ...], dict[int, int]] = {(): {}}
    tokens = list(corpus_tokens)
    for i, t in enumerate(tokens):
        for m in range(min(order - 1, i) + 1):
            ctx = tuple(tokens[i - m : i])
            bucket = counts.setdefault(ctx, {})
            bucket[t] = bucket.get(t, 0) + 1
    return NGramModel(order, vocab_size, counts)


def model_to_bytes(model: NGramModel) -> bytes:
    """Canonical file form: contexts sorted, then next-token ids sorted."""
    entries = []
    for ctx in sorted(model.counts):
        next_counts = model.counts[ctx]
        if not next_counts and ctx != ():
            continue
        entries.append(
            {"ctx": list(ctx), "next": [[t, next_counts[t]] for t in sorted(next_counts)]}
        )
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "order": model.order,
        "vocab_size": model.vocab_size,
        "counts": entries,
    }
    return json.dumps(doc, separators=(",", ":")).encode("ascii") + b"\n"


def model_from_bytes(data: bytes) -> NGramModel:
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ModelError(f"malformed model file: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("malformed model file: expected an object")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model version: {doc.get('version')!r}")
    order = doc.get("order")
    vocab_size = doc.get("vocab_size")
    if not isinstance(order, int) or not isinstance(vocab_size, int):
        raise ModelError("malformed model file: bad order or vocab_size")
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    for entry in doc.get("counts", []):
        if not isinstance(entry, dict) or "ctx" not in entry or "next" not in entry:
            raise ModelError("malformed model file: bad counts entry")
        ctx = tuple(entry["ctx"])
        if ctx in counts:
            raise ModelError(f"duplicate context {ctx}")
        pairs = {}
        for pair in entry["next"]:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ModelError("malformed model file: bad next entry")
            if pair[0] in pairs:
                raise ModelError(f"duplicate next id {pair[0]} under context {ctx}")
            pairs[pair[0]] = pair[1]
        counts[ctx] = pairs
    try:
        return NGramModel(order, vocab_size, counts)
    except (ValueError, TypeError) as exc:
        raise ModelError(str(exc)) from None


def save_model(model: NGramModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> NGramModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
