import base64
import json
import random
import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from stegotext import __version__
from stegotext.lm import model_from_bytes, model_to_bytes
from stegotext.service import create_app
from stegotext.vocab import vocabulary_from_bytes, vocabulary_to_bytes


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


_rng = random.Random(23)
_POOL = [b"use", b"useful", b"used", b"land", b"wet", b"form", b"formal", b"point", b"data"]
CORPUS = (
    b"\n".join(b"".join(_rng.choice(_POOL) for _ in range(8)) for _ in range(120)) + b"\n"
)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def trained(client):
    vocab_reply = client.post(
        "/vocab/train", json={"corpus_b64": b64(CORPUS), "target_size": 320}
    ).json()
    lm_reply = client.post(
        "/lm/train",
        json={"corpus_b64": b64(CORPUS), "vocab_b64": vocab_reply["vocab_b64"], "order": 3},
    ).json()
    return vocab_reply["vocab_b64"], lm_reply["lm_b64"]


class TestHealth:
    def test_health(self, client):
        reply = client.get("/health")
        assert reply.status_code == 200
        assert reply.json() == {"status": "ok", "version": __version__}


class TestTraining:
    def test_vocab_train_returns_canonical_file(self, client):
        reply = client.post("/vocab/train", json={"corpus_b64": b64(CORPUS), "target_size": 300})
        assert reply.status_code == 200
        body = reply.json()
        vocab = vocabulary_from_bytes(base64.b64decode(body["vocab_b64"]))
        assert len(vocab) == body["tokens"] == 300
        assert vocabulary_to_bytes(vocab) == base64.b64decode(body["vocab_b64"])

    def test_lm_train_returns_canonical_file(self, client, trained):
        vocab_b64, lm_b64 = trained
        model = model_from_bytes(base64.b64decode(lm_b64))
        assert model.order == 3
        assert model_to_bytes(model) == base64.b64decode(lm_b64)

    def test_empty_corpus_is_400(self, client):
        reply = client.post("/vocab/train", json={"corpus_b64": "", "target_size": 300})
        assert reply.status_code == 400
        assert "empty corpus" in reply.json()["detail"]["message"]

    def test_bad_base64_is_400(self, client):
        reply = client.post("/vocab/train", json={"corpus_b64": "@@", "target_size": 300})
        assert reply.status_code == 400
        assert reply.json()["detail"]["kind"] == "base64"


class TestCodecEndpoints:
    def test_encode_decode_roundtrip_with_trace(self, client, trained):
        vocab_b64, lm_b64 = trained
        encode_reply = client.post(
            "/codec/encode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "prompt_b64": b64(b"useful"),
                "message_hex": "deadbeef",
                "method": "proposed",
                "include_trace": True,
            },
        )
        assert encode_reply.status_code == 200
        encoded = encode_reply.json()
        assert encoded["bits_embedded"] == 32
        assert encoded["tokens_generated"] == len(encoded["token_ids"])
        assert encoded["trace"][0]["step"] == 0
        decode_reply = client.post(
            "/codec/decode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "prompt_b64": b64(b"useful"),
                "cover_b64": encoded["cover_b64"],
                "msg_len_bits": 32,
                "method": "proposed",
            },
        )
        assert decode_reply.status_code == 200
        decoded = decode_reply.json()
        assert decoded["message_hex"] == "deadbeef"
        assert decoded["bit_len"] == 32
        assert decoded["consumed_bytes"] == len(base64.b64decode(encoded["cover_b64"]))

    def test_decode_corrupted_cover_is_422(self, client, trained):
        vocab_b64, lm_b64 = trained
        encoded = client.post(
            "/codec/encode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "message_hex": "ab12",
            },
        ).json()
        cover = bytearray(base64.b64decode(encoded["cover_b64"]))
        cover[0] ^= 0xFF
        reply = client.post(
            "/codec/decode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "cover_b64": b64(bytes(cover)),
                "msg_len_bits": 16,
                "method": "proposed",
            },
        )
        assert reply.status_code == 422
        assert reply.json()["detail"]["kind"] in {"desynchronized", "truncated cover"}

    def test_unaware_decode_returns_retokenization(self, client, trained):
        vocab_b64, lm_b64 = trained
        encoded = client.post(
            "/codec/encode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "message_hex": "0f",
                "method": "unaware",
            },
        ).json()
        reply = client.post(
            "/codec/decode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "cover_b64": encoded["cover_b64"],
                "msg_len_bits": 8,
                "method": "unaware",
            },
        )
        assert reply.status_code == 200
        assert reply.json()["retokenized_ids"]

    def test_bad_p_is_400(self, client, trained):
        vocab_b64, lm_b64 = trained
        reply = client.post(
            "/codec/encode",
            json={
                "vocab_b64": vocab_b64,
                "lm_b64": lm_b64,
                "message_hex": "ff",
                "p": "nonsense",
            },
        )
        assert reply.status_code == 400

    def test_bad_hex_is_400(self, client, trained):
        vocab_b64, lm_b64 = trained
        reply = client.post(
            "/codec/encode",
            json={"vocab_b64": vocab_b64, "lm_b64": lm_b64, "message_hex": "zz"},
        )
        assert reply.status_code == 400


class TestBenchEndpoint:
    def test_bench_runs_and_is_deterministic(self, client):
        payload = {
            "corpus_b64": b64(CORPUS),
            "vocab_size": 300,
            "order": 3,
            "trials": 4,
            "seed": 11,
            "msg_len_bits": 16,
        }
        first = client.post("/bench", json=payload)
        second = client.post("/bench", json=payload)
        assert first.status_code == 200
        assert first.json() == second.json()
        report = json.loads(base64.b64decode(first.json()["report_json_b64"]))
        assert report["config"]["trials"] == 4
        assert report["methods"]["proposed"]["failures"] == 0
        csv_text = base64.b64decode(first.json()["report_csv_b64"]).decode()
        assert csv_text.startswith("method,error_rate_pct,bits_per_token,trials,seed\n")


class TestLiveServer:
    def test_uvicorn_serves_the_same_app(self, trained):
        import uvicorn

        config = uvicorn.Config(create_app(), host="127.0.0.1", port=0, log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            for _ in range(200):
                if server.started:
                    break
                time.sleep(0.02)
            assert server.started, "uvicorn never started"
            port = server.servers[0].sockets[0].getsockname()[1]
            reply = httpx.get(f"http://127.0.0.1:{port}/health", timeout=5)
            assert reply.status_code == 200
            assert reply.json()["status"] == "ok"
        finally:
            server.should_exit = True
            thread.join(timeout=5)
