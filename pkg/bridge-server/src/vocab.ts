/**
 * Canonical vocabulary files: {"version":1,"tokens":[{"id":N,"bytes":"<base64>"},...]}
 * with dense ascending ids, non-empty surfaces, and every single byte value
 * covered. The handshake fingerprint is the SHA-256 of the file bytes as
 * read, so both parties must use the canonical serialization.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface Vocabulary {
  surfaces: Buffer[];
  fingerprint: string;
  raw: Buffer;
}

export function parseVocabulary(raw: Buffer): Vocabulary {
  let doc: unknown;
  try {
    doc = JSON.parse(raw.toString("utf8"));
  } catch (err) {
    throw new Error(`malformed vocabulary file: ${(err as Error).message}`);
  }
  const obj = doc as { version?: unknown; tokens?: unknown };
  if (obj.version !== 1) throw new Error(`unsupported vocabulary version: ${obj.version}`);
  if (!Array.isArray(obj.tokens)) throw new Error("malformed vocabulary file: no token list");
  const surfaces: Buffer[] = [];
  for (const entry of obj.tokens) {
    const token = entry as { id?: unknown; bytes?: unknown };
    if (typeof token.id !== "number" || typeof token.bytes !== "string") {
      throw new Error("malformed vocabulary file: bad token entry");
    }
    if (token.id !== surfaces.length) {
      throw new Error(`non-contiguous ids: expected ${surfaces.length}, got ${token.id}`);
    }
    const surface = Buffer.from(token.bytes, "base64");
    if (surface.length === 0) throw new Error(`empty surface at id ${token.id}`);
    surfaces.push(surface);
  }
  const seen = new Set<number>();
  for (const surface of surfaces) {
    if (surface.length === 1) seen.add(surface[0]);
  }
  if (seen.size !== 256) {
    throw new Error(`incomplete byte coverage: ${256 - seen.size} byte values missing`);
  }
  return {
    surfaces,
    fingerprint: createHash("sha256").update(raw).digest("hex"),
    raw,
  };
}

export function loadVocabulary(path: string): Vocabulary {
  return parseVocabulary(readFileSync(path));
}

/** Canonical serialization; equals `raw` when the input was canonical. */
export function serializeVocabulary(vocab: Vocabulary): Buffer {
  const tokens = vocab.surfaces
    .map((surface, id) => `{"id":${id},"bytes":"${surface.toString("base64")}"}`)
    .join(",");
  return Buffer.from(`{"version":1,"tokens":[${tokens}]}\n`, "utf8");
}
