"""Domain types: projects, metrics, observations, snapshots, vulnerabilities.

All types are immutable values after construction (frozen dataclasses) and are
safe to share between concurrent tasks. External representation is JSON with
snake_case field names and RFC 3339 UTC timestamps; `to_dict`/`from_dict` are
the single serialization path used by the store, the fixtures and the API.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Iterable, Mapping

from .errors import BadTimestamp, KindMismatch, UnknownMetric, ValidationError
from .timeutil import format_ts, parse_ts

PLATFORMS = ("github", "gitlab", "other-host")
FOCUSES = ("security", "activity", "relevance", "general")
METRIC_KINDS = ("quantitative", "qualitative")
DIRECTIONS = ("higher_is_better", "lower_is_better", "neutral")
NORMALIZATION_METHODS = ("saturating_log", "linear_clamp", "identity")
SEVERITIES = ("low", "medium", "high", "critical")
ORDINAL_MIN, ORDINAL_MAX = 0, 4

_NAME_FORBIDDEN = re.compile(r"[/:\s]")
_CANONICAL_ID = re.compile(r"^(github|gitlab|other-host):([^/:\s]+)/([^/:\s]+)$")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _opt_ts(value: str | None) -> datetime | None:
    return parse_ts(value) if value is not None else None


def _opt_fmt(dt: datetime | None) -> str | None:
    return format_ts(dt) if dt is not None else None


@dataclass(frozen=True, slots=True)
class ProjectRef:
    """Canonical identity of one project on one code host.

    The canonical_id is lowercase "<platform>:<owner>/<name>"; hosts treat
    owner/name case-insensitively in URLs, so a single lowercase key prevents
    duplicate project rows.
    """

    platform: str
    owner: str
    name: str

    def __post_init__(self):
        _require(self.platform in PLATFORMS, f"unknown platform {self.platform!r}")
        for label, value in (("owner", self.owner), ("name", self.name)):
            _require(bool(value), f"{label} must be non-empty")
            _require(
                not _NAME_FORBIDDEN.search(value),
                f"{label} {value!r} contains '/' ':' or whitespace",
            )
            _require(value == value.lower(), f"{label} {value!r} must be lowercase in a ProjectRef")

    @property
    def canonical_id(self) -> str:
        return f"{self.platform}:{self.owner}/{self.name}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "platform": self.platform,
            "owner": self.owner,
            "name": self.name,
            "canonical_id": self.canonical_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ProjectRef":
        ref = cls(platform=d["platform"], owner=d["owner"], name=d["name"])
        declared = d.get("canonical_id")
        if declared is not None and declared != ref.canonical_id:
            raise ValidationError(
                f"canonical_id {declared!r} does not match fields ({ref.canonical_id})"
            )
        return ref


def canonicalize(platform: str, owner: str, name: str) -> ProjectRef:
    """Build a ProjectRef with the canonical lowercase identity.

    Trims surrounding whitespace, lowercases, and rejects empty or malformed
    parts. parse_canonical_id(ref.canonical_id) round-trips to an equal ref.
    """
    if not isinstance(platform, str) or not isinstance(owner, str) or not isinstance(name, str):
        raise ValidationError("platform, owner and name must be strings")
    owner = owner.strip()
    name = name.strip()
    _require(bool(owner) and bool(name), "owner and name must be non-empty after trimming")
    return ProjectRef(platform=platform.strip().lower(), owner=owner.lower(), name=name.lower())


def parse_canonical_id(canonical_id: str) -> ProjectRef:
    """Inverse of ProjectRef.canonical_id."""
    if not isinstance(canonical_id, str):
        raise ValidationError("canonical_id must be a string")
    m = _CANONICAL_ID.match(canonical_id)
    if not m or canonical_id != canonical_id.lower():
        raise ValidationError(f"malformed canonical_id {canonical_id!r}")
    return ProjectRef(platform=m.group(1), owner=m.group(2), name=m.group(3))


@dataclass(frozen=True, slots=True)
class ProjectRecord:
    """Descriptive metadata of one project, as fetched at one instant."""

    ref: ProjectRef
    created_at: datetime
    fetched_at: datetime
    description: str | None = None
    primary_language: str | None = None
    license: str | None = None
    homepage: str | None = None
    topics: tuple[str, ...] = ()

    def __post_init__(self):
        # fetched_at >= created_at is deliberately NOT required: hosts backfill.
        _require(self.created_at.tzinfo is not None, "created_at must be aware UTC")
        _require(self.fetched_at.tzinfo is not None, "fetched_at must be aware UTC")
        if self.license is not None:
            _require(bool(self.license.strip()), "license, when present, must be a non-empty token")
        object.__setattr__(self, "topics", tuple(self.topics))

    def to_dict(self) -> dict[str, Any]:
        return {
            "ref": self.ref.to_dict(),
            "description": self.description,
            "primary_language": self.primary_language,
            "license": self.license,
            "homepage": self.homepage,
            "created_at": format_ts(self.created_at),
            "fetched_at": format_ts(self.fetched_at),
            "topics": list(self.topics),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ProjectRecord":
        return cls(
            ref=ProjectRef.from_dict(d["ref"]),
            description=d.get("description"),
            primary_language=d.get("primary_language"),
            license=d.get("license"),
            homepage=d.get("homepage"),
            created_at=parse_ts(d["created_at"]),
            fetched_at=parse_ts(d["fetched_at"]),
            topics=tuple(d.get("topics") or ()),
        )


@dataclass(frozen=True, slots=True)
class NormalizationSpec:
    """How a raw metric value maps into [0,1]; cap is the saturation point."""

    method: str
    cap: float = 1.0

    def __post_init__(self):
        _require(self.method in NORMALIZATION_METHODS, f"unknown normalization {self.method!r}")
        _require(
            isinstance(self.cap, (int, float)) and math.isfinite(self.cap) and self.cap > 0,
            "normalization cap must be a positive finite number",
        )

    def to_dict(self) -> dict[str, Any]:
        return {"method": self.method, "cap": float(self.cap)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NormalizationSpec":
        return cls(method=d["method"], cap=d["cap"])


@dataclass(frozen=True, slots=True)
class MetricDefinition:
    """One entry of the metric registry.

    Qualitative metrics are ordinal judgments on a 0-4 scale (0 = no
    evidence, 4 = exemplary) and are always higher_is_better.
    """

    id: str
    display_name: str
    kind: str
    focus: str
    unit: str
    direction: str
    normalization: NormalizationSpec

    def __post_init__(self):
        _require(bool(re.fullmatch(r"[a-z][a-z0-9_]*", self.id)), f"metric id {self.id!r} must be snake_case")
        _require(self.kind in METRIC_KINDS, f"unknown metric kind {self.kind!r}")
        _require(self.focus in FOCUSES, f"unknown focus {self.focus!r}")
        _require(self.direction in DIRECTIONS, f"unknown direction {self.direction!r}")
        if self.kind == "qualitative":
            _require(
                self.direction == "higher_is_better",
                f"qualitative metric {self.id} must be higher_is_better",
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "kind": self.kind,
            "focus": self.focus,
            "unit": self.unit,
            "direction": self.direction,
            "normalization": self.normalization.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricDefinition":
        return cls(
            id=d["id"],
            display_name=d["display_name"],
            kind=d["kind"],
            focus=d["focus"],
            unit=d["unit"],
            direction=d["direction"],
            normalization=NormalizationSpec.from_dict(d["normalization"]),
        )


@dataclass(frozen=True, slots=True)
class ObservationValue:
    """Tagged union: exactly one of number, ordinal (0-4) or text."""

    kind: str  # "number" | "ordinal" | "text"
    raw: float | int | str

    def __post_init__(self):
        if self.kind == "number":
            _require(isinstance(self.raw, (int, float)) and not isinstance(self.raw, bool), "number value must be numeric")
            _require(math.isfinite(float(self.raw)), "number value must be finite")
            object.__setattr__(self, "raw", float(self.raw))
        elif self.kind == "ordinal":
            _require(isinstance(self.raw, int) and not isinstance(self.raw, bool), "ordinal value must be an integer")
            _require(ORDINAL_MIN <= self.raw <= ORDINAL_MAX, f"ordinal value {self.raw} outside 0-4")
        elif self.kind == "text":
            _require(isinstance(self.raw, str), "text value must be a string")
        else:
            raise ValidationError(f"unknown observation value kind {self.kind!r}")

    @classmethod
    def number(cls, v: float) -> "ObservationValue":
        return cls("number", v)

    @classmethod
    def ordinal(cls, v: int) -> "ObservationValue":
        return cls("ordinal", v)

    @classmethod
    def text(cls, v: str) -> "ObservationValue":
        return cls("text", v)

    def to_dict(self) -> dict[str, Any]:
        return {self.kind: self.raw}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ObservationValue":
        if not isinstance(d, Mapping) or len(d) != 1:
            raise ValidationError(f"observation value must be a single-key object, got {d!r}")
        kind, raw = next(iter(d.items()))
        return cls(kind, raw)


@dataclass(frozen=True, slots=True)
class MetricObservation:
    """One timestamped measured value of one metric for one project."""

    metric_id: str
    project: str
    value: ObservationValue
    observed_at: datetime
    source: str

    def __post_init__(self):
        _require(bool(self.metric_id), "metric_id must be non-empty")
        parse_canonical_id(self.project)
        _require(isinstance(self.observed_at, datetime), "observed_at is mandatory")
        _require(self.observed_at.tzinfo is not None, "observed_at must be aware UTC")
        _require(bool(self.source), "source must identify the collector or attestation")

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric_id": self.metric_id,
            "project": self.project,
            "value": self.value.to_dict(),
            "observed_at": format_ts(self.observed_at),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricObservation":
        if "observed_at" not in d or d["observed_at"] in (None, ""):
            raise BadTimestamp("observation is missing observed_at")
        return cls(
            metric_id=d["metric_id"],
            project=d["project"],
            value=ObservationValue.from_dict(d["value"]),
            observed_at=parse_ts(d["observed_at"]),
            source=d["source"],
        )


@dataclass(frozen=True, slots=True)
class SignalVector:
    """Named non-negative signal magnitudes feeding the criticality score."""

    values: Mapping[str, float]

    def __post_init__(self):
        clean: dict[str, float] = {}
        for name, v in self.values.items():
            _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"signal {name!r} must be numeric")
            v = float(v)
            _require(math.isfinite(v) and v >= 0.0, f"signal {name!r} must be finite and >= 0")
            clean[str(name)] = v
        object.__setattr__(self, "values", clean)

    def get(self, name: str) -> float:
        return self.values.get(name, 0.0)

    def to_dict(self) -> dict[str, float]:
        return dict(self.values)

    @classmethod
    def from_dict(cls, d: Mapping[str, float]) -> "SignalVector":
        return cls(values=dict(d))


@dataclass(frozen=True, slots=True)
class SignalParams:
    """Weight and saturation threshold of one criticality signal."""

    weight: float
    threshold: float

    def __post_init__(self):
        _require(
            isinstance(self.weight, (int, float)) and math.isfinite(self.weight) and self.weight >= 0,
            "signal weight must be finite and >= 0",
        )
        _require(
            isinstance(self.threshold, (int, float)) and math.isfinite(self.threshold) and self.threshold > 0,
            "signal threshold must be finite and > 0",
        )

    def to_dict(self) -> dict[str, float]:
        return {"weight": float(self.weight), "threshold": float(self.threshold)}


@dataclass(frozen=True, slots=True)
class CriticalPolicy:
    """Disjunctive criticality gate: score threshold OR dependents threshold."""

    score_threshold: float
    dependents_threshold: int

    def __post_init__(self):
        _require(0 < self.score_threshold <= 1, "score_threshold must be in (0, 1]")
        _require(
            isinstance(self.dependents_threshold, int) and self.dependents_threshold > 0,
            "dependents_threshold must be a positive integer",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "score_threshold": float(self.score_threshold),
            "dependents_threshold": self.dependents_threshold,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CriticalPolicy":
        return cls(
            score_threshold=d["score_threshold"],
            dependents_threshold=d["dependents_threshold"],
        )


@dataclass(frozen=True, slots=True)
class CriticalityParams:
    """Per-signal weights/thresholds plus the critical-flag policy."""

    signals: Mapping[str, SignalParams]
    critical_policy: CriticalPolicy

    def __post_init__(self):
        _require(bool(self.signals), "at least one signal must be configured")
        _require(
            any(p.weight > 0 for p in self.signals.values()),
            "at least one signal weight must be > 0",
        )
        object.__setattr__(self, "signals", dict(self.signals))

    def to_dict(self) -> dict[str, Any]:
        return {
            "signals": {name: p.to_dict() for name, p in sorted(self.signals.items())},
            "critical_policy": self.critical_policy.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CriticalityParams":
        return cls(
            signals={
                name: SignalParams(weight=s["weight"], threshold=s["threshold"])
                for name, s in d["signals"].items()
            },
            critical_policy=CriticalPolicy.from_dict(d["critical_policy"]),
        )


@dataclass(frozen=True, slots=True)
class HealthSnapshot:
    """Per-project scores and flags computed at one instant."""

    project: str
    computed_at: datetime
    category_scores: Mapping[str, float]
    criticality: float
    is_critical: bool
    input_digest: str

    def __post_init__(self):
        parse_canonical_id(self.project)
        _require(0.0 <= self.criticality <= 1.0, f"criticality {self.criticality} outside [0,1]")
        for cat, score in self.category_scores.items():
            _require(cat in FOCUSES, f"unknown category {cat!r}")
            _require(0.0 <= score <= 1.0, f"category score {cat}={score} outside [0,1]")
        _require(bool(self.input_digest), "input_digest must be non-empty")
        object.__setattr__(self, "category_scores", dict(self.category_scores))

    def to_dict(self) -> dict[str, Any]:
        return {
            "project": self.project,
            "computed_at": format_ts(self.computed_at),
            "category_scores": {k: self.category_scores[k] for k in sorted(self.category_scores)},
            "criticality": self.criticality,
            "is_critical": self.is_critical,
            "input_digest": self.input_digest,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "HealthSnapshot":
        return cls(
            project=d["project"],
            computed_at=parse_ts(d["computed_at"]),
            category_scores=dict(d.get("category_scores") or {}),
            criticality=d["criticality"],
            is_critical=d["is_critical"],
            input_digest=d["input_digest"],
        )


@dataclass(frozen=True, slots=True)
class VulnerabilityRecord:
    """One known security vulnerability affecting a package."""

    vuln_id: str
    package: str
    affected_range: str
    severity: str
    severity_score: float
    published_at: datetime
    fixed_at: datetime | None = None
    fixed_version: str | None = None

    def __post_init__(self):
        _require(bool(self.vuln_id), "vuln_id must be non-empty")
        _require(bool(self.package), "package must be non-empty")
        _require(self.severity in SEVERITIES, f"unknown severity {self.severity!r}")
        _require(0.0 <= self.severity_score <= 10.0, f"severity_score {self.severity_score} outside [0,10]")
        if self.fixed_at is not None:
            _require(self.fixed_at >= self.published_at, "fixed_at must be >= published_at")

    def to_dict(self) -> dict[str, Any]:
        return {
            "vuln_id": self.vuln_id,
            "package": self.package,
            "affected_range": self.affected_range,
            "severity": self.severity,
            "severity_score": self.severity_score,
            "published_at": format_ts(self.published_at),
            "fixed_at": _opt_fmt(self.fixed_at),
            "fixed_version": self.fixed_version,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "VulnerabilityRecord":
        return cls(
            vuln_id=d["vuln_id"],
            package=d["package"],
            affected_range=d["affected_range"],
            severity=d["severity"],
            severity_score=d["severity_score"],
            published_at=parse_ts(d["published_at"]),
            fixed_at=_opt_ts(d.get("fixed_at")),
            fixed_version=d.get("fixed_version"),
        )


@dataclass(frozen=True, slots=True)
class DependencyEdge:
    """Directed edge of the dependency graph: `from_node` depends on `to_node`.

    Serialized field names are "from"/"to"; the attribute names dodge the
    Python keyword.
    """

    from_node: str
    to_node: str
    kind: str  # "runtime" | "dev"
    constraint: str = ""

    def __post_init__(self):
        _require(bool(self.from_node) and bool(self.to_node), "edge endpoints must be non-empty")
        _require(self.kind in ("runtime", "dev"), f"unknown dependency kind {self.kind!r}")
        _require(
            node_name(self.from_node) != node_name(self.to_node),
            f"self-edge {self.from_node!r} -> {self.to_node!r}",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "from": self.from_node,
            "to": self.to_node,
            "kind": self.kind,
            "constraint": self.constraint,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DependencyEdge":
        return cls(
            from_node=d["from"],
            to_node=d["to"],
            kind=d["kind"],
            constraint=d.get("constraint") or "",
        )


def node_name(ident: str) -> str:
    """Graph node label for a project id or package name.

    Canonical project ids collapse to their trailing name segment so that an
    edge written against "github:demo/alpha" and a vulnerability filed against
    package "alpha" meet on the same node. Plain package names pass through.
    """
    m = _CANONICAL_ID.match(ident)
    return m.group(3) if m else ident


@dataclass(frozen=True, slots=True)
class Attestation:
    """A timestamped, assessor-signed qualitative judgment for one project."""

    id: str
    project: str
    metric_id: str
    assessor: str
    value: int
    asserted_at: datetime
    evidence_uri: str | None = None
    expires_at: datetime | None = None

    def __post_init__(self):
        _require(bool(self.id), "attestation id must be non-empty")
        parse_canonical_id(self.project)
        _require(bool(self.metric_id), "metric_id must be non-empty")
        _require(bool(self.assessor), "assessor must be non-empty")
        _require(
            isinstance(self.value, int) and ORDINAL_MIN <= self.value <= ORDINAL_MAX,
            f"attestation value {self.value!r} outside ordinal 0-4",
        )
        if self.expires_at is not None:
            _require(self.expires_at > self.asserted_at, "expires_at must be > asserted_at")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "project": self.project,
            "metric_id": self.metric_id,
            "assessor": self.assessor,
            "value": self.value,
            "evidence_uri": self.evidence_uri,
            "asserted_at": format_ts(self.asserted_at),
            "expires_at": _opt_fmt(self.expires_at),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Attestation":
        return cls(
            id=d["id"],
            project=d["project"],
            metric_id=d["metric_id"],
            assessor=d["assessor"],
            value=d["value"],
            evidence_uri=d.get("evidence_uri"),
            asserted_at=parse_ts(d["asserted_at"]),
            expires_at=_opt_ts(d.get("expires_at")),
        )


class MetricRegistry:
    """Lookup table over MetricDefinitions plus their default score weights."""

    def __init__(self, definitions: Iterable[MetricDefinition], default_weights: Mapping[str, float] | None = None):
        self._by_id: dict[str, MetricDefinition] = {}
        for definition in definitions:
            if definition.id in self._by_id:
                raise ValidationError(f"duplicate metric id {definition.id!r} in registry")
            self._by_id[definition.id] = definition
        self.default_weights = dict(default_weights or {})
        for metric_id in self.default_weights:
            if metric_id not in self._by_id:
                raise ValidationError(f"default weight for unknown metric {metric_id!r}")

    def __contains__(self, metric_id: str) -> bool:
        return metric_id in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def get(self, metric_id: str) -> MetricDefinition:
        try:
            return self._by_id[metric_id]
        except KeyError:
            raise UnknownMetric(f"metric {metric_id!r} is not in the registry") from None

    def ids(self) -> list[str]:
        return list(self._by_id)

    def of_focus(self, focus: str) -> list[MetricDefinition]:
        _require(focus in FOCUSES, f"unknown focus {focus!r}")
        return [d for d in self._by_id.values() if d.focus == focus]

    def qualitative(self) -> list[MetricDefinition]:
        return [d for d in self._by_id.values() if d.kind == "qualitative"]


def validate_observation(obs: MetricObservation, registry: MetricRegistry) -> None:
    """Accept iff the metric exists and the value variant matches its kind.

    Raises UnknownMetric, KindMismatch or BadTimestamp (the timestamp check
    already happened at parse time; re-validated here for direct constructions).
    """
    definition = registry.get(obs.metric_id)
    if obs.observed_at.tzinfo is None:
        raise BadTimestamp(f"observation for {obs.metric_id} lacks a UTC timestamp")
    if definition.kind == "quantitative":
        if obs.value.kind != "number":
            raise KindMismatch(
                f"metric {obs.metric_id} is quantitative but value is {obs.value.kind}"
            )
    else:
        if obs.value.kind not in ("ordinal", "text"):
            raise KindMismatch(
                f"metric {obs.metric_id} is qualitative but value is {obs.value.kind}"
            )
