"""Exception types shared across the package.

Every error raised on a contract boundary derives from HallucheckError so
callers can catch one base class at the CLI / API edge.
"""

from __future__ import annotations


class HallucheckError(Exception):
    """Base class for all package-level errors."""


# --- reference ingestion ---------------------------------------------------


class NoReferencesSectionError(HallucheckError):
    """Document contains no recognizable references/bibliography heading."""


class NoIdentifierError(HallucheckError):
    """No identifier marker present in the given text."""


class MalformedIdentifierError(HallucheckError):
    """An identifier marker is present but the value violates the grammar."""


class BibtexSyntaxError(HallucheckError):
    """Unparseable BibTeX input. Carries the 0-based entry index."""

    def __init__(self, message: str, entry_index: int):
        super().__init__(f"entry {entry_index}: {message}")
        self.entry_index = entry_index


# --- bibliographic index ---------------------------------------------------


class FormatError(HallucheckError):
    """A snapshot or dump file does not have the expected structure."""


class XmlError(FormatError):
    """Malformed XML input. Carries a best-effort (line, column) position."""

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)
        self.position = position


class DuplicateIdError(HallucheckError):
    """Two records with the same namespaced id were offered to one index."""

    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id: {record_id}")
        self.record_id = record_id


class VersionMismatchError(HallucheckError):
    """On-disk index has a wrong magic header or an unsupported version."""


# --- matching ----------------------------------------------------------------


class EmptyQueryError(HallucheckError):
    """Query title is empty after normalization."""


# --- external verification --------------------------------------------------


class NetworkError(HallucheckError):
    """Transport-level failure (DNS, connect, timeout). Retryable."""


class ServiceError(HallucheckError):
    """The external service answered with a non-success status."""

    def __init__(self, service: str, status: int, excerpt: str = ""):
        message = f"{service} returned HTTP {status}"
        if excerpt:
            message = f"{message}: {excerpt}"
        super().__init__(message)
        self.service = service
        self.status = status


class ResponseParseError(HallucheckError):
    """The external service answered 200 with an undecodable body."""

    def __init__(self, service: str, message: str = "unparseable response body"):
        super().__init__(f"{service}: {message}")
        self.service = service


class OfflineMissError(HallucheckError):
    """Cache miss while network use is disabled."""


# --- analytics ---------------------------------------------------------------


class EmptyInputError(HallucheckError):
    """A statistic was requested over an empty collection."""


class InconsistentTotalsError(HallucheckError):
    """Claimed totals are smaller than the flagged counts they must cover."""


class EmptyCorpusError(HallucheckError):
    """A term-weight comparison needs at least one title on each side."""


# --- scan / triage / server --------------------------------------------------


class IndexLoadError(HallucheckError):
    """The index directory given to a scan is missing or unreadable."""


class NoInputsError(HallucheckError):
    """A scan was started with an empty input list."""


class ConfigError(HallucheckError):
    """Config file or config override with an unknown key or a bad value."""


class CorruptLogError(HallucheckError):
    """Verdict log contains an undecodable line. Carries the line number."""

    def __init__(self, path: str, line_no: int, message: str = "undecodable line"):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class VerdictValidationError(HallucheckError):
    """A submitted verdict violates the verdict schema or protocol rules.

    ``reason`` is a stable machine-readable token surfaced over the API.
    """

    def __init__(self, reason: str, detail: str):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


class BindError(HallucheckError):
    """The triage server cannot bind its address."""
