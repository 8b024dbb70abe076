"""Linguistic steganography toolkit.

Block encoding of secret bit strings into generated text over a shared
deterministic language model, with an ambiguity-unaware baseline decoder
and a stepwise decoder that guarantees exact recovery.
"""

from .bits import Bits, bits_from_hex, bits_from_int, bits_to_hex, bits_to_int
from .bridge import BridgeConfig, BridgeModel, connect_stdio, connect_tcp
from .codec import (
    METHOD_PROPOSED,
    METHOD_UNAWARE,
    BlockCodec,
    Candidate,
    CodecParams,
    StepRecord,
    assign_chunks,
    block_size,
    candidate_filter,
    decode_proposed,
    decode_unaware,
    disambiguate,
    encode,
)
from .errors import (
    BridgeError,
    BridgeProtocolError,
    BridgeServerError,
    BridgeTimeoutError,
    CodecError,
    ConfigError,
    DecodeError,
    DesynchronizedError,
    EncodingStalledError,
    InsufficientCandidatesError,
    ModelError,
    StegotextError,
    TokenNotInCandidatesError,
    TruncatedCoverError,
    VocabularyError,
    VocabularyMismatchError,
)
from .harness import (
    TrialConfig,
    TrialOutcome,
    TrialReport,
    emit_report,
    load_prompts,
    run_trials,
)
from .lm import (
    DenseDistribution,
    NGramModel,
    NextTokenModel,
    SparseDistribution,
    load_model,
    model_from_bytes,
    model_to_bytes,
    save_model,
    train_ngram,
)
from .prng import PRNG_ID, trial_message_bits
from .vocab import (
    Token,
    Vocabulary,
    byte_vocabulary,
    detokenize,
    greedy_tokenize,
    load_vocab,
    save_vocab,
    train_bpe,
    vocabulary_fingerprint,
    vocabulary_from_bytes,
    vocabulary_to_bytes,
)

__version__ = "0.1.0"
