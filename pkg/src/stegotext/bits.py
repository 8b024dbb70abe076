"""Bit-string helpers.

A message is an immutable tuple of 0/1 ints, most significant bit first.
Lengths are exact; hex conversion pads only at the display boundary.
"""

from __future__ import annotations

Bits = tuple[int, ...]


def bits_from_int(value: int, width: int) -> tuple[int, ...]:
    """Return `width` bits of `value`, MSB first."""
    if width < 0:
        raise ValueError("width must be non-negative")
    if value < 0 or value >= (1 << width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def bits_to_int(bits: tuple[int, ...]) -> int:
    """Interpret bits MSB-first as an unsigned integer."""
    out = 0
    for b in bits:
        out = (out << 1) | (b & 1)
    return out


def bits_from_hex(text: str, bit_len: int | None = None) -> tuple[int, ...]:
    """Parse a hex string into bits (4 per digit), optionally truncated to `bit_len`.

    `bit_len` may drop at most the trailing bits of the final digit; the
    dropped bits must be zero so the conversion stays lossless.
    """
    text = text.strip().lower().removeprefix("0x")
    if not text:
        return ()
    try:
        value = int(text, 16)
    except ValueError:
        raise ValueError(f"invalid hex string: {text!r}") from None
    full = 4 * len(text)
    bits = bits_from_int(value, full)
    if bit_len is None:
        return bits
    if bit_len > full or bit_len < full - 3:
        raise ValueError(f"bit length {bit_len} incompatible with {len(text)} hex digits")
    if any(bits[bit_len:]):
        raise ValueError("dropped trailing bits are not zero")
    return bits[:bit_len]


def bits_to_hex(bits: tuple[int, ...]) -> str:
    """Render bits as hex, zero-padding the final partial digit on the right."""
    if not bits:
        return ""
    pad = (-len(bits)) % 4
    padded = tuple(bits) + (0,) * pad
    return f"{bits_to_int(padded):0{len(padded) // 4}x}"
