"""Exception hierarchy shared across the toolkit."""


class KicError(Exception):
    """Base class for all toolkit errors."""


class WordlistError(KicError):
    """Wordlist file is missing or contains an invalid entry."""


class TransportError(KicError):
    """Network-level failure that persisted through all retries."""


class RateLimitedByServer(TransportError):
    """The remote side kept answering 429 until retries ran out."""


class NotFound(KicError):
    """The remote side has no page for this keyword (HTTP 404)."""


class ParseError(KicError):
    """Document contains no recognizable example-sentence container."""


class EmptyAfterDedup(KicError):
    """Deduplication removed every record."""


class FormatError(KicError):
    """A dataset file or manifest failed validation.

    Carries the offending path and, when line-scoped, the 1-based line
    number.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(where + message)


class EmptyReference(KicError):
    """Metric asked to score against an empty reference."""


class InvalidKeyword(KicError):
    """Keyword is empty or contains whitespace."""


class BackendUnreachable(KicError):
    """Every generation call to a backend failed at the transport level."""


class ProtocolError(KicError):
    """A generation backend answered with a malformed body."""


class EmptySplit(KicError):
    """Evaluation split contains no pairs."""


class StoreError(KicError):
    """The bot's profile store could not be written."""


class AuthError(KicError):
    """The chat platform rejected the bot token."""
