"""Stdio/TCP mock bridge server used by transport-level tests.

Usage:
    python mock_bridge_server.py --vocab vocab.json --model lm.json [--tcp PORT]
"""

from __future__ import annotations

import argparse
import socket
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from mock_bridge import handler_for_files  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--vocab", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--tcp", type=int, default=None, help="listen on this port instead of stdio")
    args = parser.parse_args()
    handler = handler_for_files(args.vocab, args.model)
    if args.tcp is None:
        out = sys.stdout.buffer
        for line in sys.stdin.buffer:
            out.write(handler.handle_line(line.rstrip(b"\n")) + b"\n")
            out.flush()
        return
    server = socket.create_server(("127.0.0.1", args.tcp))
    conn, _ = server.accept()
    with conn:
        buffer = b""
        while True:
            chunk = conn.recv(65536)
            if not chunk:
                break
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                conn.sendall(handler.handle_line(line) + b"\n")
    server.close()


if __name__ == "__main__":
    main()
