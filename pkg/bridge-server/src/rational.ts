/**
 * Exact rationals over BigInt and the deterministic decimal rendering the
 * wire format requires. The formatting algorithm (round-half-even at a
 * fixed number of significant digits, no exponent, trailing zeros kept)
 * must produce byte-identical strings to the client's implementation.
 */

export interface Ratio {
  num: bigint;
  den: bigint; // > 0
}

export function ratio(num: bigint, den: bigint): Ratio {
  if (den <= 0n) throw new Error(`denominator must be positive, got ${den}`);
  if (num < 0n) throw new Error(`negative score: ${num}/${den}`);
  return { num, den };
}

/** a >= b for non-negative ratios. */
export function gte(a: Ratio, b: Ratio): boolean {
  return a.num * b.den >= b.num * a.den;
}

/** Parse a plain decimal string like "0.01" or "1" (no exponent). */
export function parseDecimal(text: string): Ratio {
  const m = /^(\d+)(?:\.(\d+))?$/.exec(text.trim());
  if (!m) throw new Error(`invalid decimal: ${JSON.stringify(text)}`);
  const whole = m[1];
  const frac = m[2] ?? "";
  return ratio(BigInt(whole + frac), 10n ** BigInt(frac.length));
}

function divHalfEven(num: bigint, den: bigint): bigint {
  let q = num / den;
  const r = num - q * den;
  if (2n * r > den || (2n * r === den && q % 2n === 1n)) q += 1n;
  return q;
}

/** Decimal with exactly `digits` significant digits, round-half-even. */
export function formatScore(value: Ratio, digits = 18): string {
  if (digits < 1) throw new Error("digits must be positive");
  if (value.num === 0n) return "0";
  const num = value.num;
  const den = value.den;
  // exponent e with 10^e <= value < 10^(e+1)
  let e = num.toString().length - den.toString().length;
  const scaledNum = e < 0 ? num * 10n ** BigInt(-e) : num;
  const scaledDen = e > 0 ? den * 10n ** BigInt(e) : den;
  if (scaledNum < scaledDen) e -= 1;
  const shift = digits - 1 - e;
  let q =
    shift >= 0
      ? divHalfEven(num * 10n ** BigInt(shift), den)
      : divHalfEven(num, den * 10n ** BigInt(-shift));
  if (q === 10n ** BigInt(digits)) {
    q /= 10n;
    e += 1;
  }
  const text = q.toString();
  if (e >= digits - 1) return text + "0".repeat(e - digits + 1);
  if (e >= 0) return `${text.slice(0, e + 1)}.${text.slice(e + 1)}`;
  return "0." + "0".repeat(-e - 1) + text;
}
