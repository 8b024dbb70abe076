"""Byte-surface subword vocabularies.

Every token is exactly the bytes it contributes to the detokenized text,
so detokenization is plain concatenation and prefix comparisons are byte
comparisons. Word-boundary conventions of production tokenizers (leading
"##", "▁", remapped byte alphabets) must be resolved into raw bytes
before a vocabulary is built; word-initial tokens simply carry their
leading space byte.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import VocabularyError

VOCAB_FORMAT_VERSION = 1
BYTE_VOCAB_SIZE = 256


@dataclass(frozen=True)
class Token:
    """A subword unit: a dense id plus the bytes it contributes."""

    id: int
    surface: bytes


class Vocabulary:
    """An immutable, dense-id token list closed over all 256 single bytes.

    Duplicate surfaces are allowed (real vocabularies have them); the codec
    resolves them. The all-bytes invariant makes greedy tokenization total.
    """

    __slots__ = ("tokens", "by_surface", "_max_surface_len")

    def __init__(self, surfaces: Sequence[bytes]):
        tokens = []
        by_surface: dict[bytes, tuple[int, ...]] = {}
        for i, surface in enumerate(surfaces):
            surface = bytes(surface)
            if not surface:
                raise VocabularyError(f"empty surface at id {i}")
            tokens.append(Token(i, surface))
            by_surface[surface] = by_surface.get(surface, ()) + (i,)
        missing = [b for b in range(BYTE_VOCAB_SIZE) if bytes([b]) not in by_surface]
        if missing:
            raise VocabularyError(
                f"incomplete byte coverage: {len(missing)} byte values have no token "
                f"(first missing: 0x{missing[0]:02x})"
            )
        self.tokens: tuple[Token, ...] = tuple(tokens)
        self.by_surface = by_surface
        self._max_surface_len = max(len(s) for s in by_surface)

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def surface(self, token_id: int) -> bytes:
        return self.tokens[token_id].surface

    def primary_id(self, surface: bytes) -> int:
        """Smallest id carrying `surface` (the id an off-the-shelf tokenizer emits)."""
        return self.by_surface[surface][0]


def byte_vocabulary() -> Vocabulary:
    """The 256-token base vocabulary: one token per byte value."""
    return Vocabulary([bytes([b]) for b in range(BYTE_VOCAB_SIZE)])


def detokenize(tokens: Iterable[Token]) -> bytes:
    """Concatenate token surfaces into the cover byte string."""
    return b"".join(t.surface for t in tokens)


def greedy_tokenize(text: bytes, vocab: Vocabulary) -> list[Token]:
    """Left-to-right maximal munch over the vocabulary's surfaces.

    At each position the longest matching surface wins; equal surfaces
    resolve to the smallest id. Total for any byte string thanks to the
    all-bytes invariant, and detokenize(greedy_tokenize(t)) == t. This is
    the ambiguity-unaware receiver's retokenizer: it does not necessarily
    recover the token sequence that produced `text`.
    """
    out: list[Token] = []
    pos = 0
    n = len(text)
    by_surface = vocab.by_surface
    max_len = vocab._max_surface_len
    while pos < n:
        for length in range(min(max_len, n - pos), 0, -1):
            ids = by_surface.get(text[pos : pos + length])
            if ids is not None:
                out.append(vocab.tokens[ids[0]])
                pos += length
                break
    return out


def train_bpe(corpus: bytes, target_size: int) -> Vocabulary:
    """Train a byte-level BPE vocabulary of min(target_size, attainable) tokens.

    Pair frequency counts every adjacent position (overlaps included); the
    most frequent pair merges each round, ties broken by the lexicographically
    smallest merged byte string, then by the pair's ids. Replacement is
    left-to-right and non-overlapping. Merging continues while any adjacent
    pair remains, so the result is deterministic for a fixed corpus.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if target_size < BYTE_VOCAB_SIZE:
        raise ValueError(f"target_size must be >= {BYTE_VOCAB_SIZE}, got {target_size}")
    surfaces: list[bytes] = [bytes([b]) for b in range(BYTE_VOCAB_SIZE)]
    seq = np.frombuffer(corpus, dtype=np.uint8).astype(np.int64)
    while len(surfaces) < target_size and seq.size >= 2:
        keys = (seq[:-1] << 32) | seq[1:]
        uniq, counts = np.unique(keys, return_counts=True)
        best = counts.max()
        top = uniq[counts == best]
        a, b = min(
            ((int(k) >> 32, int(k) & 0xFFFFFFFF) for k in top),
            key=lambda ab: (surfaces[ab[0]] + surfaces[ab[1]], ab),
        )
        new_id = len(surfaces)
        surfaces.append(surfaces[a] + surfaces[b])
        positions = np.nonzero((seq[:-1] == a) & (seq[1:] == b))[0]
        if a == b:
            kept = []
            last = -2
            for q in positions.tolist():
                if q > last + 1:
                    kept.append(q)
                    last = q
            positions = np.array(kept, dtype=positions.dtype)
        seq[positions] = new_id
        keep = np.ones(seq.size, dtype=bool)
        keep[positions + 1] = False
        seq = seq[keep]
    return Vocabulary(surfaces)


def vocabulary_to_bytes(vocab: Vocabulary) -> bytes:
    """Canonical file form; stable bytes for fingerprinting."""
    doc = {
        "version": VOCAB_FORMAT_VERSION,
        "tokens": [
            {"id": t.id, "bytes": base64.b64encode(t.surface).decode("ascii")}
            for t in vocab.tokens
        ],
    }
    return json.dumps(doc, separators=(",", ":")).encode("ascii") + b"\n"


def vocabulary_from_bytes(data: bytes) -> Vocabulary:
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise VocabularyError(f"malformed vocabulary file: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("tokens"), list):
        raise VocabularyError("malformed vocabulary file: expected an object with a token list")
    if doc.get("version") != VOCAB_FORMAT_VERSION:
        raise VocabularyError(f"unsupported vocabulary version: {doc.get('version')!r}")
    surfaces: list[bytes] = []
    seen: set[int] = set()
    for entry in doc["tokens"]:
        if not isinstance(entry, dict) or "id" not in entry or "bytes" not in entry:
            raise VocabularyError("malformed vocabulary file: bad token entry")
        token_id = entry["id"]
        if not isinstance(token_id, int) or token_id < 0:
            raise VocabularyError(f"malformed vocabulary file: bad id {token_id!r}")
        if token_id in seen:
            raise VocabularyError(f"duplicate id {token_id}")
        seen.add(token_id)
        if token_id != len(surfaces):
            raise VocabularyError(f"non-contiguous ids: expected {len(surfaces)}, got {token_id}")
        try:
            surface = base64.b64decode(entry["bytes"], validate=True)
        except Exception:
            raise VocabularyError(
                f"malformed vocabulary file: invalid base64 for id {token_id}"
            ) from None
        surfaces.append(surface)
    return Vocabulary(surfaces)


def save_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "wb") as fh:
        fh.write(vocabulary_to_bytes(vocab))


def load_vocab(path) -> Vocabulary:
    with open(path, "rb") as fh:
        return vocabulary_from_bytes(fh.read())


def vocabulary_fingerprint(vocab: Vocabulary) -> str:
    """SHA-256 of the canonical file bytes; used in the bridge handshake."""
    return hashlib.sha256(vocabulary_to_bytes(vocab)).hexdigest()
