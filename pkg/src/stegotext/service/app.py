"""HTTP service wrapping the core library.

Every endpoint is stateless: models and vocabularies arrive with the
request, so concurrent requests never share mutable state. Decode
failures map to 422 with a structured kind; malformed inputs map to 400.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bits import bits_from_hex, bits_to_hex
from ..codec import BlockCodec, CodecParams, StepRecord
from ..errors import (
    ConfigError,
    DecodeError,
    DesynchronizedError,
    ModelError,
    StegotextError,
    TokenNotInCandidatesError,
    TruncatedCoverError,
    VocabularyError,
)
from ..harness import TrialConfig, emit_report, load_prompts, run_trials
from ..lm import model_from_bytes, model_to_bytes, train_ngram
from ..rationals import parse_ratio
from ..vocab import greedy_tokenize, train_bpe, vocabulary_from_bytes, vocabulary_to_bytes
from .schemas import (
    BenchRequest,
    BenchResponse,
    DecodeRequest,
    DecodeResponse,
    EncodeRequest,
    EncodeResponse,
    HealthResponse,
    TraceStep,
    TrainLmRequest,
    TrainLmResponse,
    TrainVocabRequest,
    TrainVocabResponse,
)

DECODE_FAILURE_KINDS = {
    DesynchronizedError: "desynchronized",
    TruncatedCoverError: "truncated cover",
    TokenNotInCandidatesError: "token not in candidate set",
}


def _bad_request(kind: str, message: str) -> HTTPException:
    return HTTPException(status_code=400, detail={"kind": kind, "message": message})


def _b64decode(data: str, what: str) -> bytes:
    try:
        return base64.b64decode(data, validate=True)
    except Exception:
        raise _bad_request("base64", f"invalid base64 in {what}") from None


def _load_vocab(b64: str):
    try:
        return vocabulary_from_bytes(_b64decode(b64, "vocab_b64"))
    except VocabularyError as exc:
        raise _bad_request("vocabulary", str(exc)) from None


def _load_model(b64: str):
    try:
        return model_from_bytes(_b64decode(b64, "lm_b64"))
    except ModelError as exc:
        raise _bad_request("model", str(exc)) from None


def _parse_p(text: str):
    try:
        return parse_ratio(text)
    except ValueError as exc:
        raise _bad_request("config", str(exc)) from None


def _trace_steps(trace: list[StepRecord]) -> list[TraceStep]:
    return [
        TraceStep(
            step=r.step,
            n=r.n,
            chosen_id=r.chosen_id,
            bits="".join(str(b) for b in r.bits),
            before_ids=list(r.before_ids),
            after_ids=list(r.after_ids),
        )
        for r in trace
    ]


def create_app() -> FastAPI:
    app = FastAPI(title="stegotext", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/vocab/train", response_model=TrainVocabResponse)
    def vocab_train(request: TrainVocabRequest) -> TrainVocabResponse:
        corpus = _b64decode(request.corpus_b64, "corpus_b64")
        try:
            vocab = train_bpe(corpus, request.target_size)
        except ValueError as exc:
            raise _bad_request("config", str(exc)) from None
        return TrainVocabResponse(
            vocab_b64=base64.b64encode(vocabulary_to_bytes(vocab)).decode(),
            tokens=len(vocab),
        )

    @app.post("/lm/train", response_model=TrainLmResponse)
    def lm_train(request: TrainLmRequest) -> TrainLmResponse:
        corpus = _b64decode(request.corpus_b64, "corpus_b64")
        vocab = _load_vocab(request.vocab_b64)
        try:
            tokens = [t.id for t in greedy_tokenize(corpus, vocab)]
            model = train_ngram(tokens, request.order, len(vocab))
        except ValueError as exc:
            raise _bad_request("config", str(exc)) from None
        return TrainLmResponse(
            lm_b64=base64.b64encode(model_to_bytes(model)).decode(),
            contexts=len(model.counts),
        )

    @app.post("/codec/encode", response_model=EncodeResponse, response_model_exclude_none=True)
    def codec_encode(request: EncodeRequest) -> EncodeResponse:
        vocab = _load_vocab(request.vocab_b64)
        model = _load_model(request.lm_b64)
        prompt = _b64decode(request.prompt_b64, "prompt_b64")
        msg_len = request.msg_len_bits or 4 * len(request.message_hex.strip().removeprefix("0x"))
        try:
            message = bits_from_hex(request.message_hex, msg_len)
            params = CodecParams(p=_parse_p(request.p), method=request.method, msg_len_bits=msg_len)
            tokens, cover, trace = BlockCodec(model, vocab, params).encode(message, prompt)
        except (ValueError, ConfigError) as exc:
            raise _bad_request("config", str(exc)) from None
        except StegotextError as exc:
            raise _bad_request("codec", str(exc)) from None
        return EncodeResponse(
            cover_b64=base64.b64encode(cover).decode(),
            token_ids=[t.id for t in tokens],
            tokens_generated=len(tokens),
            bits_embedded=len(message),
            trace=_trace_steps(trace) if request.include_trace else None,
        )

    @app.post("/codec/decode", response_model=DecodeResponse, response_model_exclude_none=True)
    def codec_decode(request: DecodeRequest) -> DecodeResponse:
        vocab = _load_vocab(request.vocab_b64)
        model = _load_model(request.lm_b64)
        prompt = _b64decode(request.prompt_b64, "prompt_b64")
        cover = _b64decode(request.cover_b64, "cover_b64")
        try:
            params = CodecParams(
                p=_parse_p(request.p), method=request.method, msg_len_bits=request.msg_len_bits
            )
            codec = BlockCodec(model, vocab, params)
        except ConfigError as exc:
            raise _bad_request("config", str(exc)) from None
        try:
            if request.method == "proposed":
                bits, consumed, trace = codec.decode_proposed(cover, prompt)
                return DecodeResponse(
                    message_hex=bits_to_hex(bits),
                    bit_len=len(bits),
                    consumed_bytes=consumed,
                    trace=_trace_steps(trace) if request.include_trace else None,
                )
            bits, retokenized = codec.decode_unaware(cover, prompt)
            return DecodeResponse(
                message_hex=bits_to_hex(bits),
                bit_len=len(bits),
                retokenized_ids=[t.id for t in retokenized],
            )
        except DecodeError as exc:
            raise HTTPException(
                status_code=422,
                detail={"kind": DECODE_FAILURE_KINDS[type(exc)], "message": str(exc)},
            ) from None

    @app.post("/bench", response_model=BenchResponse)
    def bench(request: BenchRequest) -> BenchResponse:
        corpus = _b64decode(request.corpus_b64, "corpus_b64")
        try:
            if request.vocab_b64 is not None:
                vocab = _load_vocab(request.vocab_b64)
            else:
                vocab = train_bpe(corpus, request.vocab_size)
            if request.lm_b64 is not None:
                model = _load_model(request.lm_b64)
            else:
                tokens = [t.id for t in greedy_tokenize(corpus, vocab)]
                model = train_ngram(tokens, request.order, len(vocab))
            config = TrialConfig(
                trials=request.trials,
                seed=request.seed,
                msg_len_bits=request.msg_len_bits,
                p=_parse_p(request.p),
                methods=tuple(request.methods),
                max_prompt_bytes=request.max_prompt_bytes,
            )
            report = run_trials(
                config, load_prompts(corpus), model, vocab, workers=request.workers
            )
        except (ValueError, ConfigError) as exc:
            raise _bad_request("config", str(exc)) from None
        return BenchResponse(
            report_json_b64=base64.b64encode(emit_report(report, "json", vocab=vocab)).decode(),
            report_csv_b64=base64.b64encode(emit_report(report, "csv")).decode(),
        )

    return app


app = create_app()
