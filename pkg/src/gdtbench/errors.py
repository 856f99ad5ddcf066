"""Exception hierarchy for the gdtbench package.

Every failure raised by this package derives from GdtBenchError so callers
(and the CLI) can catch one type. Exceptions carry plain-text messages;
machine-readable context goes in dedicated attributes where needed.
"""

from __future__ import annotations


class GdtBenchError(Exception):
    """Base class for all gdtbench errors."""


# --- symbol / value normalization ---------------------------------------


class UnknownSymbol(GdtBenchError):
    """Input text matches no geometric characteristic, alias, or name."""


class EmptyValue(GdtBenchError):
    """A field value normalized to the empty string."""


# --- annotation / manifest I/O -------------------------------------------


class MalformedJson(GdtBenchError):
    """Annotation text is not valid JSON."""


class SchemaViolation(GdtBenchError):
    """JSON parsed but does not fit the annotation schema."""


class MissingHeader(GdtBenchError):
    """Manifest CSV lacks the expected header row."""


class DuplicateRecordId(GdtBenchError):
    """Two manifest rows share a record_id."""


class RaggedRow(GdtBenchError):
    """A manifest CSV row has the wrong number of fields."""


# --- dataset assembly -----------------------------------------------------


class NotPng(GdtBenchError):
    """File does not start with the PNG signature."""


class MissingAnnotation(GdtBenchError):
    """An image has no matching annotation file."""


class EmptyDirectory(GdtBenchError):
    """A required directory is missing or contains no usable files."""


class PoolTooSmall(GdtBenchError):
    """Query pool has fewer templates than queries requested per image."""


class EmptyInput(GdtBenchError):
    """An operation that needs at least one record received none."""


# --- endpoint client -------------------------------------------------------


class ImageTooLarge(GdtBenchError):
    """Image payload exceeds the configured byte cap."""


class UnsupportedStyle(GdtBenchError):
    """Endpoint config names a request style this client does not speak."""


class MissingApiKey(GdtBenchError):
    """The environment variable named by api_key_env is not set."""


class AuthError(GdtBenchError):
    """Endpoint returned 401/403; never retried."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(message or f"authentication rejected (HTTP {status})")
        self.status = status


class ExhaustedRetries(GdtBenchError):
    """All attempts failed; carries the last HTTP status (None for timeouts)."""

    def __init__(self, status: int | None, attempts: int, message: str = ""):
        detail = f"HTTP {status}" if status is not None else "no response"
        super().__init__(message or f"gave up after {attempts} attempt(s): {detail}")
        self.status = status
        self.attempts = attempts


# --- output repair ----------------------------------------------------------


class NoJsonFound(GdtBenchError):
    """No balanced JSON array or object found in model text."""


class NotAnArray(GdtBenchError):
    """Parsed prediction is valid JSON but not a top-level array."""


class RepairRefused(GdtBenchError):
    """Repair endpoint output still does not parse as JSON."""


# --- reporting ---------------------------------------------------------------


class ZeroBaseline(GdtBenchError):
    """Relative change against a zero baseline is undefined."""


class NoBaseline(GdtBenchError):
    """Comparison table requires at least one baseline run."""
