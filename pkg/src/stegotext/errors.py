"""Exception hierarchy shared across the toolkit."""


class StegotextError(Exception):
    """Base class for all toolkit errors."""


class VocabularyError(StegotextError):
    """Malformed vocabulary data or an invariant violation (e.g. missing byte tokens)."""


class ModelError(StegotextError):
    """Malformed language-model data or an invariant violation."""


class ConfigError(StegotextError):
    """Invalid parameters, flags, or configuration files."""


class CodecError(StegotextError):
    """Base class for encoding/decoding failures."""


class EncodingStalledError(CodecError):
    """The encoder ran too many consecutive forced (zero-bit) steps without progress."""


class DecodeError(CodecError):
    """Base class for receiver-side failures."""


class DesynchronizedError(DecodeError):
    """No candidate token matches the remaining cover bytes."""


class TruncatedCoverError(DecodeError):
    """The cover text ended before the full message was recovered."""


class TokenNotInCandidatesError(DecodeError):
    """A retokenized token is absent from the step's chunk-assigned candidate set."""


class BridgeError(StegotextError):
    """Base class for LM bridge failures."""


class BridgeProtocolError(BridgeError):
    """Malformed or out-of-order message on the bridge wire."""


class BridgeTimeoutError(BridgeError):
    """The bridge server did not answer within the configured timeout."""


class VocabularyMismatchError(BridgeError):
    """The server's vocabulary fingerprint does not match the loaded vocabulary."""


class InsufficientCandidatesError(BridgeError):
    """The server returned an empty candidate list for a distribution request."""


class BridgeServerError(BridgeError):
    """The server reported an error for a request."""
