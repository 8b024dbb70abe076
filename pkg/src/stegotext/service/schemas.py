"""Request/response models for the HTTP service.

Binary payloads (corpora, vocabulary and model files, prompts, covers)
travel as base64 so they stay byte-exact inside JSON.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Method = Literal["proposed", "unaware"]


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainVocabRequest(BaseModel):
    corpus_b64: str
    target_size: int = 1000


class TrainVocabResponse(BaseModel):
    vocab_b64: str
    tokens: int


class TrainLmRequest(BaseModel):
    corpus_b64: str
    vocab_b64: str
    order: int = 3


class TrainLmResponse(BaseModel):
    lm_b64: str
    contexts: int


class TraceStep(BaseModel):
    step: int
    n: int
    chosen_id: int
    bits: str = Field(description="consumed message bits as a 0/1 string")
    before_ids: list[int]
    after_ids: list[int]


class EncodeRequest(BaseModel):
    vocab_b64: str
    lm_b64: str
    prompt_b64: str = ""
    message_hex: str
    msg_len_bits: int | None = None
    p: str = "1/100"
    method: Method = "proposed"
    include_trace: bool = False


class EncodeResponse(BaseModel):
    cover_b64: str
    token_ids: list[int]
    tokens_generated: int
    bits_embedded: int
    trace: list[TraceStep] | None = None


class DecodeRequest(BaseModel):
    vocab_b64: str
    lm_b64: str
    prompt_b64: str = ""
    cover_b64: str
    msg_len_bits: int
    p: str = "1/100"
    method: Method = "proposed"
    include_trace: bool = False


class DecodeResponse(BaseModel):
    message_hex: str
    bit_len: int
    consumed_bytes: int | None = None
    retokenized_ids: list[int] | None = None
    trace: list[TraceStep] | None = None


class BenchRequest(BaseModel):
    corpus_b64: str
    vocab_b64: str | None = None
    lm_b64: str | None = None
    vocab_size: int = 1000
    order: int = 3
    trials: int
    seed: int
    msg_len_bits: int = 64
    p: str = "1/100"
    methods: list[Method] = ["proposed", "unaware"]
    max_prompt_bytes: int | None = None
    workers: int = 1


class BenchResponse(BaseModel):
    report_json_b64: str
    report_csv_b64: str
