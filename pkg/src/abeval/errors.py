"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, data and statistics
errors -> 3, annotator errors -> 4.
"""

from __future__ import annotations


class AbevalError(Exception):
    """Base class for all package errors."""


class ConfigError(AbevalError):
    """Invalid run configuration (bad flag value, malformed config file)."""


# ── event log parsing ────────────────────────────────────────────────


class DataError(AbevalError):
    """Base class for malformed or insufficient input data."""


class MalformedLineError(DataError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class SchemaError(DataError):
    def __init__(self, line_no: int, field: str, reason: str):
        super().__init__(f"line {line_no}: field {field!r}: {reason}")
        self.line_no = line_no
        self.field = field


class InvalidRatingError(DataError):
    def __init__(self, line_no: int, value):
        super().__init__(f"line {line_no}: rating stars must be an integer in 1..5, got {value!r}")
        self.line_no = line_no
        self.value = value


class UnbalancedStatesError(DataError):
    """Running/Stopped events do not pair up within a session."""

    def __init__(self, session_id: str, reason: str):
        super().__init__(f"session {session_id!r}: {reason}")
        self.session_id = session_id


class OrphanRatingError(DataError):
    """A rating event that cannot be attributed to a finished work segment."""

    def __init__(self, session_id: str, reason: str):
        super().__init__(f"session {session_id!r}: {reason}")
        self.session_id = session_id


# ── annotation ───────────────────────────────────────────────────────


class AnnotatorError(AbevalError):
    """Base class for annotator-side failures."""


class AnnotatorUnavailableError(AnnotatorError):
    """Transport failure or server error that survived the retry budget."""


class AuthError(AnnotatorError):
    """Authentication rejected (401/403) or no credential available."""


class ResponseParseError(AnnotatorError):
    """Annotator response did not contain the expected JSON contract."""


class EmptySessionError(DataError):
    """Session has no user messages to annotate."""

    def __init__(self, session_id: str):
        super().__init__(f"session {session_id!r} has no user messages")
        self.session_id = session_id


# ── modeling ─────────────────────────────────────────────────────────


class DimensionMismatchError(DataError):
    """Input vector or matrix width does not match the model."""


class TooFewRowsError(DataError):
    """Not enough rows for the requested operation (e.g. k-fold CV)."""


class SchemaMismatchError(DataError):
    """Stored model was fit against a different feature encoding."""


# ── inference ────────────────────────────────────────────────────────


class InsufficientDataError(DataError):
    """A condition has fewer labeled sessions than the estimator needs."""


class LambdaWithoutUnlabeledError(DataError):
    """A nonzero lambda was requested for a condition with no unlabeled data."""


class DegenerateColumnError(DataError):
    """A correlation input column has zero variance."""
