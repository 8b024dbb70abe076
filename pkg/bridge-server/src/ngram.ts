/**
 * Interpolated add-one n-gram model evaluated in exact integer arithmetic.
 *
 * A distribution is a vector of BigInt numerators over one shared
 * denominator: starting from the uniform vector, each stored context
 * level (shortest suffix first) applies nums[t] += count * d and then
 * d *= total + 1. This matches the client-side model bit for bit, which
 * is what makes bridge runs interchangeable with in-process runs.
 */

import { readFileSync } from "node:fs";

export interface NGramModel {
  order: number;
  vocabSize: number;
  counts: Map<string, Map<number, number>>;
  totals: Map<string, number>;
}

export interface Distribution {
  nums: bigint[];
  den: bigint;
}

const key = (ctx: number[]) => ctx.join(",");

export function parseModel(raw: Buffer): NGramModel {
  let doc: unknown;
  try {
    doc = JSON.parse(raw.toString("utf8"));
  } catch (err) {
    throw new Error(`malformed model file: ${(err as Error).message}`);
  }
  const obj = doc as { version?: unknown; order?: unknown; vocab_size?: unknown; counts?: unknown };
  if (obj.version !== 1) throw new Error(`unsupported model version: ${obj.version}`);
  if (typeof obj.order !== "number" || obj.order < 1) throw new Error("bad order");
  if (typeof obj.vocab_size !== "number" || obj.vocab_size < 1) throw new Error("bad vocab_size");
  const counts = new Map<string, Map<number, number>>();
  const totals = new Map<string, number>();
  for (const entry of (obj.counts as unknown[]) ?? []) {
    const { ctx, next } = entry as { ctx: number[]; next: [number, number][] };
    if (!Array.isArray(ctx) || !Array.isArray(next)) throw new Error("bad counts entry");
    if (ctx.length >= obj.order) throw new Error(`context ${ctx} too long`);
    const bucket = new Map<number, number>();
    let total = 0;
    for (const [id, count] of next) {
      if (!Number.isInteger(id) || id < 0 || id >= obj.vocab_size) {
        throw new Error(`token id ${id} out of range`);
      }
      if (!Number.isInteger(count) || count <= 0) {
        throw new Error(`non-positive count for ${ctx} -> ${id}`);
      }
      bucket.set(id, count);
      total += count;
    }
    counts.set(key(ctx), bucket);
    totals.set(key(ctx), total);
  }
  if (!counts.has("")) {
    counts.set("", new Map());
    totals.set("", 0);
  }
  return { order: obj.order, vocabSize: obj.vocab_size, counts, totals };
}

export function loadModel(path: string): NGramModel {
  return parseModel(readFileSync(path));
}

export function distribution(model: NGramModel, context: number[]): Distribution {
  const window = model.order - 1;
  const suffix = window > 0 ? context.slice(Math.max(0, context.length - window)) : [];
  const nums: bigint[] = new Array(model.vocabSize).fill(1n);
  let d = BigInt(model.vocabSize);
  for (let m = 0; m <= suffix.length; m++) {
    const ctx = suffix.slice(suffix.length - m);
    const total = model.totals.get(key(ctx)) ?? 0;
    if (total === 0) continue;
    const bucket = model.counts.get(key(ctx))!;
    for (const [id, count] of bucket) {
      nums[id] += BigInt(count) * d;
    }
    d *= BigInt(total + 1);
  }
  return { nums, den: d };
}
