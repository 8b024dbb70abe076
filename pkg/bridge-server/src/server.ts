/**
 * Request handling for the bridge wire protocol (newline-delimited JSON):
 *
 *   -> {"id":1,"op":"hello","proto":1}
 *   <- {"id":1,"vocab_size":V,"fingerprint":"<hex>","model":"<name>"}
 *   -> {"id":2,"op":"dist","context":[...],"min_score":"<decimal>","max_candidates":K}
 *   <- {"id":2,"tokens":[{"id":t,"score":"<18 significant digits>"},...]}
 *   <- {"id":N,"error":"<message>"}
 *
 * Responses sort candidates by (score desc, id asc), keep those at or
 * above min_score capped at max_candidates, and never return an empty
 * list (the single best token is always included). Identical requests
 * produce identical bytes.
 */

import { NGramModel, distribution } from "./ngram.js";
import { formatScore, gte, parseDecimal, ratio } from "./rational.js";
import { Vocabulary } from "./vocab.js";

export interface ServerOptions {
  modelName: string;
  maxContext?: number;
}

interface Request {
  id?: unknown;
  op?: unknown;
  proto?: unknown;
  context?: unknown;
  min_score?: unknown;
  max_candidates?: unknown;
}

export class BridgeServer {
  constructor(
    private readonly model: NGramModel,
    private readonly vocab: Vocabulary,
    private readonly options: ServerOptions,
  ) {
    if (model.vocabSize !== vocab.surfaces.length) {
      throw new Error(
        `model vocab_size ${model.vocabSize} != vocabulary size ${vocab.surfaces.length}`,
      );
    }
  }

  handle(request: Request): object {
    const id = typeof request.id === "number" ? request.id : null;
    try {
      switch (request.op) {
        case "hello":
          if (request.proto !== 1) {
            return { id, error: `unsupported protocol: ${request.proto}` };
          }
          return {
            id,
            vocab_size: this.model.vocabSize,
            fingerprint: this.vocab.fingerprint,
            model: this.options.modelName,
          };
        case "dist":
          return this.dist(id, request);
        default:
          return { id, error: `unknown op: ${request.op}` };
      }
    } catch (err) {
      return { id, error: (err as Error).message };
    }
  }

  private dist(id: number | null, request: Request): object {
    const context = request.context;
    if (!Array.isArray(context) || context.some((t) => !Number.isInteger(t))) {
      return { id, error: "bad context" };
    }
    if (context.some((t) => t < 0 || t >= this.model.vocabSize)) {
      return { id, error: "context id out of range" };
    }
    if (this.options.maxContext !== undefined && context.length > this.options.maxContext) {
      return { id, error: "context too long" };
    }
    const minScore = parseDecimal(String(request.min_score ?? "0"));
    const cap =
      typeof request.max_candidates === "number" && request.max_candidates >= 1
        ? request.max_candidates
        : Number.MAX_SAFE_INTEGER;
    const { nums, den } = distribution(this.model, context as number[]);
    const order = nums.map((_, t) => t);
    order.sort((a, b) => (nums[a] === nums[b] ? a - b : nums[b] > nums[a] ? 1 : -1));
    let kept = order.filter((t) => gte(ratio(nums[t], den), minScore)).slice(0, cap);
    if (kept.length === 0) kept = order.slice(0, 1);
    return {
      id,
      tokens: kept.map((t) => ({ id: t, score: formatScore(ratio(nums[t], den)) })),
    };
  }

  handleLine(line: string): string {
    let reply: object;
    try {
      reply = this.handle(JSON.parse(line));
    } catch {
      reply = { id: null, error: "malformed request" };
    }
    return JSON.stringify(reply);
  }
}
