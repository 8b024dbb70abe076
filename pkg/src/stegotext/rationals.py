"""Exact rational parsing and deterministic decimal rendering.

All rendering is integer arithmetic with round-half-even, so any two
implementations (including the bridge server) produce identical strings
for identical rationals.
"""

from __future__ import annotations

from fractions import Fraction


def parse_ratio(text: str) -> Fraction:
    """Parse "num/den" or a decimal literal into an exact Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"invalid rational: {text!r}") from None


def format_ratio(value: Fraction) -> str:
    """Render as "num/den" (canonical lowest terms)."""
    return f"{value.numerator}/{value.denominator}"


def _div_half_even(num: int, den: int) -> int:
    """num/den rounded to the nearest integer, ties to even. Requires den > 0."""
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2):
        q += 1
    return q


def decimal_string(value: Fraction, places: int) -> str:
    """Fixed-point decimal with exactly `places` fractional digits."""
    if value < 0:
        return "-" + decimal_string(-value, places)
    scaled = _div_half_even(value.numerator * 10**places, value.denominator)
    if places == 0:
        return str(scaled)
    digits = str(scaled).rjust(places + 1, "0")
    return f"{digits[:-places]}.{digits[-places:]}"


def significant_decimal(value: Fraction, digits: int = 18, rounding: str = "half-even") -> str:
    """Plain decimal (no exponent) with exactly `digits` significant digits.

    Used for scores on the bridge wire. Zero renders as "0"; otherwise the
    output keeps trailing zeros so the digit count is fixed. `rounding` is
    "half-even" or "floor" (floor never overstates a cutoff value).
    """
    if digits < 1:
        raise ValueError("digits must be positive")
    if rounding not in ("half-even", "floor"):
        raise ValueError(f"unknown rounding mode: {rounding!r}")
    if value == 0:
        return "0"
    if value < 0:
        return "-" + significant_decimal(-value, digits, rounding)
    num, den = value.numerator, value.denominator
    # exponent e with 10^e <= value < 10^(e+1)
    e = len(str(num)) - len(str(den))
    if num * 10 ** max(0, -e) < den * 10 ** max(0, e):
        e -= 1
    shift = digits - 1 - e
    rounder = _div_half_even if rounding == "half-even" else lambda a, b: a // b
    if shift >= 0:
        q = rounder(num * 10**shift, den)
    else:
        q = rounder(num, den * 10**-shift)
    if q == 10**digits:  # rounding carried into a new leading digit
        q //= 10
        e += 1
    text = str(q)
    if e >= digits - 1:
        return text + "0" * (e - digits + 1)
    if e >= 0:
        return f"{text[: e + 1]}.{text[e + 1 :]}"
    return "0." + "0" * (-e - 1) + text
