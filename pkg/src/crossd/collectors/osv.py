"""OSV-style vulnerability document ingestion."""

from __future__ import annotations

import json
from typing import Any

from ..errors import SchemaError
from ..model import VulnerabilityRecord
from ..timeutil import parse_ts
from ..errors import BadTimestamp

# Numeric score used when a feed gives only a categorical severity, so that
# numeric statistics stay defined. Band midpoints of the CVSS v3 ranges.
SEVERITY_MIDPOINTS = {"low": 2.0, "medium": 5.5, "high": 7.5, "critical": 9.5}

_CATEGORY_ALIASES = {
    "low": "low",
    "moderate": "medium",
    "medium": "medium",
    "high": "high",
    "critical": "critical",
}

_SEVERITY_RANK = {"low": 0, "medium": 1, "high": 2, "critical": 3}


def _band_for_score(score: float) -> str:
    if score >= 9.0:
        return "critical"
    if score >= 7.0:
        return "high"
    if score >= 4.0:
        return "medium"
    return "low"


def _extract_severity(doc: dict[str, Any], file: str | None) -> tuple[str, float]:
    """Highest provided severity across numeric scores and categorical labels."""
    candidates: list[tuple[str, float]] = []
    for entry in doc.get("severity") or []:
        raw = entry.get("score")
        try:
            score = float(raw)
        except (TypeError, ValueError):
            continue
        if not 0.0 <= score <= 10.0:
            raise SchemaError(f"severity score {score} outside [0,10]", file=file, field="severity")
        candidates.append((_band_for_score(score), score))
    db = doc.get("database_specific") or {}
    label = db.get("severity")
    if isinstance(label, str) and label.lower() in _CATEGORY_ALIASES:
        category = _CATEGORY_ALIASES[label.lower()]
        candidates.append((category, SEVERITY_MIDPOINTS[category]))
    if not candidates:
        # No severity information at all: treat as low with its band midpoint.
        return "low", SEVERITY_MIDPOINTS["low"]
    return max(candidates, key=lambda c: (_SEVERITY_RANK[c[0]], c[1]))


def _render_range(events: list[dict[str, Any]]) -> str:
    parts = []
    for event in events:
        for key in ("introduced", "fixed", "last_affected", "limit"):
            if key in event:
                parts.append(f"{key}:{event[key]}")
    return " ".join(parts) or "*"


def ingest_osv_document(doc: str, file: str | None = None) -> VulnerabilityRecord:
    """Map one OSV-style JSON document to a VulnerabilityRecord.

    id -> vuln_id; first affected package and its range events -> package and
    affected_range; a "fixed" range event supplies fixed_version, and its
    "fixed_at" timestamp (our dialect; plain OSV has no per-event dates)
    supplies fixed_at. Missing id or published timestamp is a SchemaError.
    """
    try:
        payload = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", file=file) from None
    if not isinstance(payload, dict):
        raise SchemaError("document must be a JSON object", file=file)
    vuln_id = payload.get("id")
    if not vuln_id or not isinstance(vuln_id, str):
        raise SchemaError("missing vulnerability id", file=file, field="id")
    published_raw = payload.get("published")
    if not published_raw:
        raise SchemaError("missing published timestamp", file=file, field="published")
    try:
        published_at = parse_ts(published_raw)
    except BadTimestamp as exc:
        raise SchemaError(str(exc), file=file, field="published") from None

    affected = payload.get("affected") or []
    package = ""
    events: list[dict[str, Any]] = []
    fixed_version = None
    fixed_at = None
    if affected:
        first = affected[0]
        package = ((first.get("package") or {}).get("name")) or ""
        for rng in first.get("ranges") or []:
            for event in rng.get("events") or []:
                events.append(event)
                if "fixed" in event:
                    fixed_version = str(event["fixed"])
                    if event.get("fixed_at"):
                        try:
                            fixed_at = parse_ts(event["fixed_at"])
                        except BadTimestamp as exc:
                            raise SchemaError(str(exc), file=file, field="fixed_at") from None
    if not package:
        raise SchemaError("missing affected package name", file=file, field="affected")

    severity, severity_score = _extract_severity(payload, file)
    return VulnerabilityRecord(
        vuln_id=vuln_id,
        package=package,
        affected_range=_render_range(events),
        severity=severity,
        severity_score=severity_score,
        published_at=published_at,
        fixed_at=fixed_at,
        fixed_version=fixed_version,
    )
