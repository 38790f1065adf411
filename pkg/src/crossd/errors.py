"""Exception hierarchy shared across the platform."""

from __future__ import annotations


class CrossdError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CrossdError):
    """A value violates a domain invariant or schema."""


class SchemaError(ValidationError):
    """A file or document fails its schema; names the file and field."""

    def __init__(self, message: str, *, file: str | None = None, field: str | None = None):
        self.file = file
        self.field = field
        detail = message
        if file:
            detail = f"{file}: {detail}"
        if field:
            detail = f"{detail} (field: {field})"
        super().__init__(detail)


class UnknownMetric(ValidationError):
    """Observation references a metric id absent from the registry."""


class KindMismatch(ValidationError):
    """Observation value variant does not match the metric definition's kind."""


class BadTimestamp(ValidationError):
    """Timestamp text does not parse as RFC 3339 UTC."""


class ParamsError(CrossdError):
    """Criticality or category parameters are unusable (zero weights, bad threshold)."""


class DomainError(CrossdError):
    """Numeric input outside the operation's domain."""


class StorageError(CrossdError):
    """Underlying store I/O failed or a segment file is corrupt."""


class NotFound(CrossdError):
    """Requested project or resource does not exist."""


class CollectorError(CrossdError):
    """Base class for live-collector failures."""


class RateLimited(CollectorError):
    """Host rejected the request; carries the advertised retry-after delay."""

    def __init__(self, message: str, retry_after: float):
        self.retry_after = retry_after
        super().__init__(message)


class AuthError(CollectorError):
    """Host rejected the credentials."""


class HostError(CollectorError):
    """Host kept failing after the retry budget was exhausted."""


class DeliveryError(CrossdError):
    """Webhook delivery failed; recorded in the alert state, never propagated."""
