"""UTC timestamp parsing and formatting (RFC 3339 text in all external formats)."""

from __future__ import annotations

from datetime import datetime, timezone

from .errors import BadTimestamp

SECONDS_PER_DAY = 86400.0


def parse_ts(text: str) -> datetime:
    """Parse RFC 3339 text into an aware UTC datetime.

    Accepts 'Z' or numeric offsets; naive input is rejected.
    """
    if not isinstance(text, str) or not text:
        raise BadTimestamp(f"not a timestamp: {text!r}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise BadTimestamp(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        raise BadTimestamp(f"timestamp {text!r} lacks a UTC offset")
    return dt.astimezone(timezone.utc)


def format_ts(dt: datetime) -> str:
    """Render an aware datetime as RFC 3339 UTC text with 'Z' suffix."""
    if dt.tzinfo is None:
        raise BadTimestamp("refusing to format a naive datetime")
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f").rstrip("0") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def now_utc() -> datetime:
    return datetime.now(tz=timezone.utc)


def days_between(start: datetime, end: datetime) -> float:
    """Exact day difference (seconds / 86400), not calendar days."""
    return (end - start).total_seconds() / SECONDS_PER_DAY
