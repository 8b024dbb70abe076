"""Command-line front end.

The CLI is a thin client of the HTTP service: every subcommand builds a
request, posts it, and writes the response to files or stdout. By default
requests run against an in-process instance of the app; --server (or
STEGOTEXT_SERVER) points them at a running service instead.

Exit codes: 0 success, 2 decode failure, 3 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_DECODE_FAILURE = 2
EXIT_ERROR = 3


class CliError(Exception):
    """Anything that should terminate with exit code 3."""


class DecodeFailure(Exception):
    """A structured decode failure from the service (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors, not decode failures
        raise CliError(message)


class ServiceClient:
    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach service: {exc}") from None
        if response.status_code == 200:
            return response.json()
        try:
            detail = response.json().get("detail")
        except ValueError:
            detail = response.text
        if response.status_code == 422 and isinstance(detail, dict) and "kind" in detail:
            raise DecodeFailure(f"{detail['kind']}: {detail.get('message', '')}")
        raise CliError(f"service error {response.status_code}: {detail}")

    def close(self) -> None:
        self._client.close()


def _read_file(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {what}: {exc}") from None


def _write_file(path: str, data: bytes, what: str) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise CliError(f"cannot write {what}: {exc}") from None


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


def _write_trace(path: str, trace: list | None) -> None:
    if trace is None:
        raise CliError("no trace in the response (trace requires method=proposed)")
    _write_file(path, json.dumps(trace, indent=2).encode() + b"\n", "trace file")


def cmd_train_vocab(client: ServiceClient, args) -> int:
    reply = client.post(
        "/vocab/train",
        {"corpus_b64": _b64(_read_file(args.corpus, "corpus")), "target_size": args.size},
    )
    _write_file(args.out, base64.b64decode(reply["vocab_b64"]), "vocabulary file")
    print(f"wrote {args.out}: {reply['tokens']} tokens", file=sys.stderr)
    return EXIT_OK


def cmd_train_lm(client: ServiceClient, args) -> int:
    reply = client.post(
        "/lm/train",
        {
            "corpus_b64": _b64(_read_file(args.corpus, "corpus")),
            "vocab_b64": _b64(_read_file(args.vocab, "vocabulary")),
            "order": args.order,
        },
    )
    _write_file(args.out, base64.b64decode(reply["lm_b64"]), "model file")
    print(f"wrote {args.out}: {reply['contexts']} contexts", file=sys.stderr)
    return EXIT_OK


def cmd_encode(client: ServiceClient, args) -> int:
    payload = {
        "vocab_b64": _b64(_read_file(args.vocab, "vocabulary")),
        "lm_b64": _b64(_read_file(args.lm, "model")),
        "prompt_b64": _b64(_read_file(args.prompt_file, "prompt") if args.prompt_file else b""),
        "message_hex": args.message_hex,
        "msg_len_bits": args.msg_len_bits,
        "p": args.p,
        "method": args.method,
        "include_trace": args.trace is not None,
    }
    reply = client.post("/codec/encode", payload)
    sys.stdout.buffer.write(base64.b64decode(reply["cover_b64"]))
    sys.stdout.buffer.flush()
    if args.trace is not None:
        _write_trace(args.trace, reply.get("trace"))
    print(
        f"embedded {reply['bits_embedded']} bits in {reply['tokens_generated']} tokens",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_decode(client: ServiceClient, args) -> int:
    cover = _read_file(args.cover_file, "cover") if args.cover_file else sys.stdin.buffer.read()
    payload = {
        "vocab_b64": _b64(_read_file(args.vocab, "vocabulary")),
        "lm_b64": _b64(_read_file(args.lm, "model")),
        "prompt_b64": _b64(_read_file(args.prompt_file, "prompt") if args.prompt_file else b""),
        "cover_b64": _b64(cover),
        "msg_len_bits": args.msg_len_bits,
        "p": args.p,
        "method": args.method,
        "include_trace": args.trace is not None,
    }
    reply = client.post("/codec/decode", payload)
    print(reply["message_hex"])
    if args.trace is not None:
        _write_trace(args.trace, reply.get("trace"))
    return EXIT_OK


def cmd_bench(client: ServiceClient, args) -> int:
    config_path = Path(args.config)
    try:
        config = json.loads(_read_file(args.config, "config file"))
    except ValueError as exc:
        raise CliError(f"malformed config file: {exc}") from None
    if not isinstance(config, dict) or "corpus" not in config:
        raise CliError("config file must be an object with a 'corpus' path")
    base = config_path.parent

    def resolve(name: str) -> str:
        return str(base / config[name]) if name in config and config[name] else ""

    payload = {
        "corpus_b64": _b64(_read_file(str(base / config["corpus"]), "corpus")),
        "trials": config.get("trials", 1000),
        "seed": config.get("seed", 0),
        "msg_len_bits": config.get("msg_len_bits", 64),
        "p": config.get("p", "1/100"),
        "methods": config.get("methods", ["proposed", "unaware"]),
        "max_prompt_bytes": config.get("max_prompt_bytes"),
        "vocab_size": config.get("vocab_size", 1000),
        "order": config.get("order", 3),
        "workers": args.workers or config.get("workers", 1),
    }
    if resolve("vocab"):
        payload["vocab_b64"] = _b64(_read_file(resolve("vocab"), "vocabulary"))
    if resolve("lm"):
        payload["lm_b64"] = _b64(_read_file(resolve("lm"), "model"))
    reply = client.post("/bench", payload)
    _write_file(args.out, base64.b64decode(reply["report_json_b64"]), "report")
    print(f"wrote {args.out}", file=sys.stderr)
    if args.csv:
        _write_file(args.csv, base64.b64decode(reply["report_csv_b64"]), "CSV report")
        print(f"wrote {args.csv}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="stegotext", description=__doc__)
    parser.add_argument(
        "--server",
        default=os.environ.get("STEGOTEXT_SERVER"),
        help="URL of a running service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-vocab", help="train a byte-level BPE vocabulary")
    p.add_argument("corpus")
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-lm", help="train an n-gram model over a vocabulary")
    p.add_argument("corpus")
    p.add_argument("--vocab", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--out", required=True)

    for name in ("encode", "decode"):
        p = sub.add_parser(name, help=f"{name} a message (cover bytes on stdout/stdin)")
        p.add_argument("--vocab", required=True)
        p.add_argument("--lm", required=True)
        p.add_argument("--prompt-file")
        p.add_argument("--p", default="1/100", help='threshold, e.g. "1/100" or "0.01"')
        p.add_argument("--method", choices=["proposed", "unaware"], default="proposed")
        p.add_argument("--trace", help="write the step trace to this file")
        if name == "encode":
            p.add_argument("--message-hex", required=True)
            p.add_argument("--msg-len-bits", type=int, default=None)
        else:
            p.add_argument("--msg-len-bits", type=int, required=True)
            p.add_argument("--cover-file", help="read the cover here instead of stdin")

    p = sub.add_parser("bench", help="run seeded trials from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        try:
            handler = {
                "train-vocab": cmd_train_vocab,
                "train-lm": cmd_train_lm,
                "encode": cmd_encode,
                "decode": cmd_decode,
                "bench": cmd_bench,
            }[args.command]
            return handler(client, args)
        finally:
            client.close()
    except DecodeFailure as exc:
        print(f"decode failure: {exc}", file=sys.stderr)
        return EXIT_DECODE_FAILURE
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
