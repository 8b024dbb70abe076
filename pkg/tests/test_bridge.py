import json
import random
import socket
import subprocess
import sys
import threading
import time
from fractions import Fraction
from pathlib import Path

import pytest

from stegotext.bridge import BridgeConfig, BridgeModel, StdioTransport, connect_tcp
from stegotext.codec import BlockCodec, CodecParams
from stegotext.errors import (
    BridgeProtocolError,
    BridgeServerError,
    BridgeTimeoutError,
    ConfigError,
    InsufficientCandidatesError,
    VocabularyMismatchError,
)
from stegotext.lm import save_model, train_ngram
from stegotext.vocab import save_vocab, train_bpe, greedy_tokenize, vocabulary_fingerprint

from mock_bridge import (
    BridgeRequestHandler,
    LoopbackTransport,
    RecordingTransport,
    ReplayTransport,
    ScriptedTransport,
)

MOCK_SERVER = Path(__file__).resolve().parent / "mock_bridge_server.py"


@pytest.fixture(scope="module")
def setup():
    rng = random.Random(17)
    pool = [b"use", b"useful", b"used", b"land", b"wet", b"form", b"formal", b"point", b"data"]
    corpus = b"\n".join(
        b"".join(rng.choice(pool) for _ in range(8)) for _ in range(150)
    ) + b"\n"
    vocab = train_bpe(corpus, 300)
    tokens = [t.id for t in greedy_tokenize(corpus, vocab)]
    lm = train_ngram(tokens, 3, len(vocab))
    return vocab, lm


def loopback_model(vocab, lm, config=None, fingerprint=None, name="mock-ngram"):
    handler = BridgeRequestHandler(
        lm, len(vocab), fingerprint or vocabulary_fingerprint(vocab), name=name
    )
    return BridgeModel(LoopbackTransport(handler), vocab, config or BridgeConfig())


class TestHandshake:
    def test_success_exposes_server_metadata(self, setup):
        vocab, lm = setup
        model = loopback_model(vocab, lm)
        assert model.model_name == "mock-ngram"
        assert model.vocab_size == len(vocab)
        assert model.score_floor == BridgeConfig().min_score

    def test_fingerprint_mismatch_fails_before_any_step(self, setup):
        vocab, lm = setup
        with pytest.raises(VocabularyMismatchError, match="fingerprint"):
            loopback_model(vocab, lm, fingerprint="00" * 32)

    def test_vocab_size_mismatch(self, setup):
        vocab, lm = setup
        handler = BridgeRequestHandler(lm, 77, vocabulary_fingerprint(vocab))
        with pytest.raises(VocabularyMismatchError, match="77"):
            BridgeModel(LoopbackTransport(handler), vocab)

    def test_server_error_reply(self, setup):
        vocab, _ = setup
        scripted = ScriptedTransport([b'{"id":1,"error":"no model loaded"}'])
        with pytest.raises(BridgeServerError, match="no model"):
            BridgeModel(scripted, vocab)


class TestDistribution:
    def test_matches_in_process_scores_at_wire_precision(self, setup):
        vocab, lm = setup
        model = loopback_model(vocab, lm)
        context = [3, 5]
        sparse = model.distribution(context)
        dense = lm.distribution(context)
        for token_id, score in sparse.scores.items():
            exact = dense.fraction(token_id)
            assert abs(score - exact) <= exact * Fraction(1, 10**17)
            assert exact >= BridgeConfig().min_score or len(sparse.scores) == 1

    def test_empty_token_list_is_an_error(self, setup):
        vocab, lm = setup
        handler = BridgeRequestHandler(lm, len(vocab), vocabulary_fingerprint(vocab))
        model = BridgeModel(LoopbackTransport(handler), vocab)
        model._transport = ScriptedTransport([b'{"id":2,"tokens":[]}'])
        with pytest.raises(InsufficientCandidatesError):
            model.distribution([0])

    @pytest.mark.parametrize(
        "line, message",
        [
            (b"not json", "malformed"),
            (b'{"id":99,"tokens":[{"id":0,"score":"0.5"}]}', "echo"),
            (b'{"id":2,"tokens":[{"id":0,"score":"abc"}]}', "score"),
            (b'{"id":2,"tokens":[{"id":0,"score":"0.5"},{"id":0,"score":"0.5"}]}', "duplicate"),
            (b'{"id":2,"tokens":[{"id":-1,"score":"0.5"}]}', "token id"),
            (b'{"id":2,"tokens":[{"id":0,"score":"-0.5"}]}', "negative"),
            (b'{"id":2}', "token list"),
        ],
    )
    def test_malformed_responses(self, setup, line, message):
        vocab, lm = setup
        model = loopback_model(vocab, lm)
        model._transport = ScriptedTransport([line])
        with pytest.raises(BridgeProtocolError, match=message):
            model.distribution([0])

    def test_min_score_above_p_rejected_by_codec(self, setup):
        vocab, lm = setup
        model = loopback_model(vocab, lm, BridgeConfig(min_score=Fraction(1, 50)))
        with pytest.raises(ConfigError, match="floor"):
            BlockCodec(model, vocab, CodecParams(p=Fraction(1, 100)))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            BridgeConfig(timeout_ms=0)
        with pytest.raises(ConfigError):
            BridgeConfig(min_score=Fraction(3, 2))
        with pytest.raises(ConfigError):
            BridgeConfig(max_candidates=0)


class TestSubstitutability:
    def test_bridge_runs_equal_in_process_runs(self, setup):
        vocab, lm = setup
        rng = random.Random(40)
        params = CodecParams(p=Fraction(1, 100), method="proposed", msg_len_bits=32)
        local = BlockCodec(lm, vocab, params)
        remote = BlockCodec(loopback_model(vocab, lm), vocab, params)
        for _ in range(10):
            message = tuple(rng.randint(0, 1) for _ in range(32))
            prompt = b"wetland"
            local_tokens, local_cover, _ = local.encode(message, prompt)
            remote_tokens, remote_cover, _ = remote.encode(message, prompt)
            assert remote_cover == local_cover
            assert [t.id for t in remote_tokens] == [t.id for t in local_tokens]
            bits, consumed, _ = remote.decode_proposed(remote_cover, prompt)
            assert bits == message

    def test_record_then_replay_reproduces_identical_covers(self, setup):
        vocab, lm = setup
        params = CodecParams(p=Fraction(1, 100), method="proposed", msg_len_bits=40)
        handler = BridgeRequestHandler(lm, len(vocab), vocabulary_fingerprint(vocab))
        recorder = RecordingTransport(LoopbackTransport(handler))
        live = BlockCodec(BridgeModel(recorder, vocab), vocab, params)
        rng = random.Random(41)
        messages = [tuple(rng.randint(0, 1) for _ in range(40)) for _ in range(5)]
        live_covers = [live.encode(m, b"use")[1] for m in messages]
        for m, cover in zip(messages, live_covers):
            assert live.decode_proposed(cover, b"use")[0] == m
        replay = BlockCodec(
            BridgeModel(ReplayTransport(recorder.recorded), vocab), vocab, params
        )
        replay_covers = [replay.encode(m, b"use")[1] for m in messages]
        assert replay_covers == live_covers
        in_process = BlockCodec(lm, vocab, params)
        assert [in_process.encode(m, b"use")[1] for m in messages] == live_covers


class TestStdioTransport:
    def test_end_to_end_roundtrip(self, setup, tmp_path):
        vocab, lm = setup
        save_vocab(vocab, tmp_path / "vocab.json")
        save_model(lm, tmp_path / "lm.json")
        command = [
            sys.executable,
            str(MOCK_SERVER),
            "--vocab",
            str(tmp_path / "vocab.json"),
            "--model",
            str(tmp_path / "lm.json"),
        ]
        transport = StdioTransport(command, timeout_ms=10_000)
        model = BridgeModel(transport, vocab)
        try:
            params = CodecParams(p=Fraction(1, 100), method="proposed", msg_len_bits=16)
            codec = BlockCodec(model, vocab, params)
            message = (1, 0) * 8
            _, cover, _ = codec.encode(message, b"data")
            assert codec.decode_proposed(cover, b"data")[0] == message
        finally:
            model.close()

    def test_timeout(self):
        vocab = train_bpe(b"ab" * 200, 256)
        command = [sys.executable, "-c", "import time; time.sleep(30)"]
        transport = StdioTransport(command, timeout_ms=200)
        try:
            transport.send_line(b'{"id":1,"op":"hello","proto":1}')
            start = time.monotonic()
            with pytest.raises(BridgeTimeoutError):
                transport.recv_line()
            assert time.monotonic() - start < 5
        finally:
            transport.close()


class TestTcpTransport:
    def test_end_to_end_roundtrip(self, setup, tmp_path):
        vocab, lm = setup
        save_vocab(vocab, tmp_path / "vocab.json")
        save_model(lm, tmp_path / "lm.json")
        with socket.create_server(("127.0.0.1", 0)) as probe:
            port = probe.getsockname()[1]
        proc = subprocess.Popen(
            [
                sys.executable,
                str(MOCK_SERVER),
                "--vocab",
                str(tmp_path / "vocab.json"),
                "--model",
                str(tmp_path / "lm.json"),
                "--tcp",
                str(port),
            ]
        )
        try:
            model = None
            for _ in range(100):
                try:
                    model = connect_tcp("127.0.0.1", port, vocab)
                    break
                except OSError:
                    time.sleep(0.05)
            assert model is not None, "server never came up"
            params = CodecParams(p=Fraction(1, 100), method="proposed", msg_len_bits=16)
            codec = BlockCodec(model, vocab, params)
            message = (0, 1) * 8
            _, cover, _ = codec.encode(message, b"point")
            assert codec.decode_proposed(cover, b"point")[0] == message
            model.close()
        finally:
            proc.terminate()
            proc.wait()
