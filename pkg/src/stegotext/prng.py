"""Seeded message generator for benchmark trials.

The generator is SplitMix64 so other implementations can replay trials
bit-exactly. The contract, identified as ``splitmix64-trial/v1``:

* ``next(state) = mix(state + 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix``
  is the SplitMix64 finalizer (xor-shift 30, * 0xBF58476D1CE4E5B9,
  xor-shift 27, * 0x94D049BB133111EB, xor-shift 31; all mod 2**64).
* Trial ``i`` under ``seed`` starts from
  ``state = mix(seed + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``.
* Message bits are drawn from successive outputs, MSB first within each
  64-bit word.
"""

from __future__ import annotations

from .bits import Bits

PRNG_ID = "splitmix64-trial/v1"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal SplitMix64 stream over a 64-bit state."""

    __slots__ = ("_state",)

    def __init__(self, state: int):
        self._state = state & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)


def trial_stream(seed: int, trial: int) -> SplitMix64:
    """Independent stream for one trial, derived splittably from (seed, trial)."""
    return SplitMix64(_mix((seed + (trial + 1) * _GOLDEN) & _MASK64))


def trial_message_bits(seed: int, trial: int, nbits: int) -> Bits:
    """The trial's secret message: `nbits` bits, MSB-first per output word."""
    stream = trial_stream(seed, trial)
    out: list[int] = []
    while len(out) < nbits:
        word = stream.next_u64()
        out.extend((word >> (63 - i)) & 1 for i in range(min(64, nbits - len(out))))
    return tuple(out)
