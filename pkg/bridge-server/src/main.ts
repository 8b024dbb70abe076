/**
 * Bridge server entry point.
 *
 * Usage:
 *   node dist/main.js --model lm.json --vocab vocab.json --stdio
 *   node dist/main.js --model lm.json --vocab vocab.json --tcp 127.0.0.1:4815
 *   node dist/main.js --vocab vocab.json --export-vocab out.json
 *
 * Options: --max-context N (reject longer contexts), --model-name NAME,
 * --deterministic true|false (must stay true; the flag exists so callers
 * can assert the contract explicitly).
 */

import { createServer } from "node:net";
import { basename } from "node:path";
import { createInterface } from "node:readline";
import { writeFileSync } from "node:fs";

import { loadModel } from "./ngram.js";
import { BridgeServer } from "./server.js";
import { loadVocabulary, serializeVocabulary } from "./vocab.js";

interface Args {
  model?: string;
  vocab?: string;
  stdio: boolean;
  tcp?: { host: string; port: number };
  exportVocab?: string;
  maxContext?: number;
  modelName?: string;
  deterministic: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { stdio: false, deterministic: true };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--model":
        args.model = next();
        break;
      case "--vocab":
        args.vocab = next();
        break;
      case "--stdio":
        args.stdio = true;
        break;
      case "--tcp": {
        const value = next();
        const sep = value.lastIndexOf(":");
        if (sep < 0) throw new Error(`--tcp expects host:port, got ${value}`);
        args.tcp = { host: value.slice(0, sep), port: Number(value.slice(sep + 1)) };
        break;
      }
      case "--export-vocab":
        args.exportVocab = next();
        break;
      case "--max-context":
        args.maxContext = Number(next());
        break;
      case "--model-name":
        args.modelName = next();
        break;
      case "--deterministic":
        args.deterministic = next() !== "false";
        break;
      default:
        throw new Error(`unknown flag: ${flag}`);
    }
  }
  return args;
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  if (!args.deterministic) {
    console.error("deterministic mode is required for protocol guarantees");
    process.exit(1);
  }
  if (!args.vocab) {
    console.error("--vocab is required");
    process.exit(1);
  }
  const vocab = loadVocabulary(args.vocab);
  if (args.exportVocab) {
    writeFileSync(args.exportVocab, serializeVocabulary(vocab));
    console.error(`exported ${vocab.surfaces.length} tokens to ${args.exportVocab}`);
    if (!args.stdio && !args.tcp) return;
  }
  if (!args.model) {
    console.error("--model is required to serve");
    process.exit(1);
  }
  const model = loadModel(args.model);
  const server = new BridgeServer(model, vocab, {
    modelName: args.modelName ?? basename(args.model),
    maxContext: args.maxContext,
  });
  if (args.tcp) {
    const listener = createServer((conn) => {
      const lines = createInterface({ input: conn });
      lines.on("line", (line) => conn.write(server.handleLine(line) + "\n"));
    });
    listener.listen(args.tcp.port, args.tcp.host, () => {
      const address = listener.address();
      const port = typeof address === "object" && address ? address.port : args.tcp!.port;
      console.error(`listening on ${args.tcp!.host}:${port}`);
    });
    return;
  }
  if (!args.stdio) {
    console.error("choose a transport: --stdio or --tcp host:port");
    process.exit(1);
  }
  const lines = createInterface({ input: process.stdin });
  lines.on("line", (line) => process.stdout.write(server.handleLine(line) + "\n"));
}

main();
