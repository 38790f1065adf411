"""Pure metric computation: observations, category scores, criticality, snapshots.

Every operation here is a pure function of its inputs; nothing touches the
store or the network, so callers may invoke them from any number of
concurrent tasks.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, ParamsError, UnknownMetric, ValidationError
from .model import (
    Attestation,
    CriticalityParams,
    CriticalPolicy,
    DependencyEdge,
    HealthSnapshot,
    MetricObservation,
    MetricRegistry,
    ObservationValue,
    SignalParams,
    SignalVector,
    VulnerabilityRecord,
    node_name,
)
from .registry import default_registry
from .timeutil import days_between, format_ts

# Metric ids feeding the criticality signal vector, with default weights and
# saturation thresholds. Tunable via config; not ground truth.
DEFAULT_CRITICALITY_PARAMS = CriticalityParams(
    signals={
        "commits_90d": SignalParams(weight=1.0, threshold=1000.0),
        "contributors": SignalParams(weight=2.0, threshold=5000.0),
        "transitive_dependents": SignalParams(weight=3.0, threshold=50000.0),
        "downloads_90d": SignalParams(weight=1.0, threshold=1_000_000.0),
    },
    critical_policy=CriticalPolicy(score_threshold=0.8, dependents_threshold=5000),
)

SCORED_CATEGORIES = ("security", "activity", "relevance")


@dataclass(frozen=True, slots=True)
class DependencyReport:
    """Direct/transitive dependency and dependent counts for one project."""

    project: str
    direct_deps: int
    transitive_deps: int
    direct_dependents: int
    transitive_dependents: int
    vulnerable_deps: int

    def __post_init__(self):
        for name in ("direct_deps", "transitive_deps", "direct_dependents", "transitive_dependents", "vulnerable_deps"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValidationError(f"{name} must be a non-negative int, got {v!r}")
        if self.transitive_deps < self.direct_deps:
            raise ValidationError("transitive_deps must be >= direct_deps")
        if self.transitive_dependents < self.direct_dependents:
            raise ValidationError("transitive_dependents must be >= direct_dependents")

    def to_dict(self) -> dict:
        return {
            "project": self.project,
            "direct_deps": self.direct_deps,
            "transitive_deps": self.transitive_deps,
            "direct_dependents": self.direct_dependents,
            "transitive_dependents": self.transitive_dependents,
            "vulnerable_deps": self.vulnerable_deps,
        }

    @classmethod
    def empty(cls, project: str) -> "DependencyReport":
        return cls(project, 0, 0, 0, 0, 0)


@dataclass(frozen=True, slots=True)
class TimeToFixStats:
    """Fix latency summary; unfixed vulnerabilities are censored observations."""

    fixed_count: int
    open_count: int
    median_days_to_fix: float | None
    max_open_age_days: float | None

    def __post_init__(self):
        if (self.median_days_to_fix is not None) != (self.fixed_count > 0):
            raise ValidationError("median_days_to_fix present iff fixed_count > 0")
        if (self.max_open_age_days is not None) != (self.open_count > 0):
            raise ValidationError("max_open_age_days present iff open_count > 0")


def criticality_score(signals: SignalVector, params: CriticalityParams) -> float:
    """Weighted log-ratio aggregation of signal magnitudes into [0,1].

    score = sum_i(w_i * log(1+s_i) / log(1+max(s_i, t_i))) / sum_i(w_i)

    Each per-signal ratio saturates at 1 once s_i reaches its threshold t_i;
    the log base cancels in the ratio. Signals named in params but missing
    from the vector count as 0.
    """
    total_weight = 0.0
    acc = 0.0
    # Sorted accumulation: the result must not depend on config key order.
    for name, p in sorted(params.signals.items()):
        if p.threshold <= 0:
            raise ParamsError(f"threshold for signal {name!r} must be > 0")
        total_weight += p.weight
        s = signals.get(name)
        if s < 0 or not math.isfinite(s):
            raise ParamsError(f"signal {name!r} must be finite and >= 0, got {s}")
        ratio = math.log1p(s) / math.log1p(max(s, p.threshold))
        acc += p.weight * ratio
    if total_weight <= 0:
        raise ParamsError("all signal weights are zero")
    return min(1.0, max(0.0, acc / total_weight))


def normalize_metric(value: float, spec) -> float:
    """Map a raw non-negative value into [0,1] per the normalization spec."""
    if not math.isfinite(float(value)) or value < 0:
        raise DomainError(f"cannot normalize {value!r}: must be finite and >= 0")
    if spec.method == "saturating_log":
        return min(1.0, math.log1p(value) / math.log1p(spec.cap))
    if spec.method == "linear_clamp":
        return min(1.0, value / spec.cap)
    # identity: inputs must already be in [0,1]
    if value > 1.0:
        raise DomainError(f"identity normalization requires input in [0,1], got {value}")
    return float(value)


def dependency_analysis(
    edges: Iterable[DependencyEdge],
    project: str,
    runtime_only: bool = True,
    vulns: Iterable[VulnerabilityRecord] = (),
) -> DependencyReport:
    """Count direct and transitive dependencies/dependents of one project.

    Transitive counts are the sizes of the forward/backward reachable sets
    excluding the project itself, deduplicated; cycles are handled by the
    visited set. vulnerable_deps counts reachable dependencies whose node
    matches any supplied vulnerability's package.
    """
    start = node_name(project)
    fwd: dict[str, set[str]] = {}
    back: dict[str, set[str]] = {}
    for edge in edges:
        if runtime_only and edge.kind != "runtime":
            continue
        a, b = node_name(edge.from_node), node_name(edge.to_node)
        if a == b:
            continue
        fwd.setdefault(a, set()).add(b)
        back.setdefault(b, set()).add(a)

    def reach(adj: dict[str, set[str]]) -> set[str]:
        seen: set[str] = set()
        stack = list(adj.get(start, ()))
        while stack:
            node = stack.pop()
            if node in seen or node == start:
                continue
            seen.add(node)
            stack.extend(adj.get(node, ()))
        return seen

    deps = reach(fwd)
    dependents = reach(back)
    vulnerable_packages = {node_name(v.package) for v in vulns}
    return DependencyReport(
        project=project,
        direct_deps=len(fwd.get(start, set()) - {start}),
        transitive_deps=len(deps),
        direct_dependents=len(back.get(start, set()) - {start}),
        transitive_dependents=len(dependents),
        vulnerable_deps=len(deps & vulnerable_packages),
    )


def time_to_fix(vulns: Sequence[VulnerabilityRecord], as_of: datetime) -> TimeToFixStats:
    """Median days-to-fix over fixed records; open records only age the censored side.

    A record counts as fixed iff its fixed_at is known and <= as_of; records
    published after as_of are not yet known at that instant and are skipped.
    Day differences are exact seconds / 86400, not calendar days.
    """
    fix_days: list[float] = []
    open_ages: list[float] = []
    for v in vulns:
        if v.published_at > as_of:
            continue
        if v.fixed_at is not None and v.fixed_at <= as_of:
            fix_days.append(days_between(v.published_at, v.fixed_at))
        else:
            open_ages.append(days_between(v.published_at, as_of))
    fix_days.sort()
    median = None
    if fix_days:
        n = len(fix_days)
        mid = n // 2
        median = fix_days[mid] if n % 2 else (fix_days[mid - 1] + fix_days[mid]) / 2.0
    return TimeToFixStats(
        fixed_count=len(fix_days),
        open_count=len(open_ages),
        median_days_to_fix=median,
        max_open_age_days=max(open_ages) if open_ages else None,
    )


def open_vuln_count(vulns: Sequence[VulnerabilityRecord], as_of: datetime) -> int:
    """Vulnerabilities known and unfixed at as_of."""
    return sum(
        1
        for v in vulns
        if v.published_at <= as_of and (v.fixed_at is None or v.fixed_at > as_of)
    )


def compute_quantitative(
    stats,
    deps: DependencyReport,
    vulns: Sequence[VulnerabilityRecord],
    as_of: datetime,
    source: str = "metrics-engine",
) -> list[MetricObservation]:
    """Emit one observation per registry metric with an available input.

    Metrics whose inputs are absent (optional RepoStats fields, no fixed
    vulnerabilities for the median) are omitted, never zero-filled, so a
    sparse project cannot masquerade as an unhealthy one.
    """
    project = stats.project
    if deps.project != project:
        raise ValidationError(
            f"dependency report is for {deps.project}, stats are for {project}"
        )
    values: dict[str, float] = {
        "contributors": stats.contributors,
        "commits_total": stats.commits_total,
        "commits_90d": stats.commits_90d,
        "forks": stats.forks,
        "stars": stats.stars,
        "pull_requests_90d": stats.pull_requests_90d,
    }
    for optional in ("lines_of_code", "mailing_list_posts_90d", "downloads_90d"):
        v = getattr(stats, optional)
        if v is not None:
            values[optional] = v
    values["direct_deps"] = deps.direct_deps
    values["transitive_deps"] = deps.transitive_deps
    values["transitive_dependents"] = deps.transitive_dependents
    values["vulnerable_deps"] = deps.vulnerable_deps
    values["open_vulns"] = open_vuln_count(vulns, as_of)
    values["high_or_critical_vulns"] = sum(
        1 for v in vulns if v.published_at <= as_of and v.severity in ("high", "critical")
    )
    ttf = time_to_fix(vulns, as_of)
    if ttf.median_days_to_fix is not None:
        values["median_days_to_fix"] = ttf.median_days_to_fix
    return [
        MetricObservation(
            metric_id=metric_id,
            project=project,
            value=ObservationValue.number(float(v)),
            observed_at=as_of,
            source=source,
        )
        for metric_id, v in values.items()
    ]


def _latest_numeric(observations: Iterable[MetricObservation]) -> dict[str, MetricObservation]:
    """Latest observation per metric id (ties broken by source), numeric or ordinal."""
    latest: dict[str, MetricObservation] = {}
    for obs in observations:
        if obs.value.kind == "text":
            continue
        cur = latest.get(obs.metric_id)
        if cur is None or (obs.observed_at, obs.source) > (cur.observed_at, cur.source):
            latest[obs.metric_id] = obs
    return latest


def category_score(
    observations: Sequence[MetricObservation],
    registry: MetricRegistry,
    weights: Mapping[str, float],
    focus: str,
) -> float | None:
    """Weighted mean of normalized, direction-adjusted metrics of one focus.

    lower_is_better metrics contribute (1 - n); neutral metrics are excluded.
    Weights are renormalized over the metrics actually observed. Returns None
    when no metric of the focus has an observation.
    """
    for metric_id in weights:
        try:
            definition = registry.get(metric_id)
        except UnknownMetric:
            raise ParamsError(f"weight references unknown metric {metric_id!r}") from None
        if definition.focus != focus:
            raise ParamsError(
                f"weight for {metric_id!r} (focus {definition.focus}) used in {focus} score"
            )
    latest = _latest_numeric(observations)
    acc = 0.0
    total_weight = 0.0
    # Sorted accumulation keeps the score independent of observation order.
    for metric_id, obs in sorted(latest.items()):
        if metric_id not in registry:
            continue
        definition = registry.get(metric_id)
        if definition.focus != focus or definition.direction == "neutral":
            continue
        weight = weights.get(metric_id, 0.0)
        if weight <= 0:
            continue
        n = normalize_metric(float(obs.value.raw), definition.normalization)
        contribution = n if definition.direction == "higher_is_better" else 1.0 - n
        acc += weight * contribution
        total_weight += weight
    if total_weight <= 0:
        return None
    return acc / total_weight


def is_critical(criticality: float, dependency_report: DependencyReport, policy: CriticalPolicy) -> bool:
    """True iff the score or the transitive dependent count crosses its threshold."""
    if not 0.0 <= criticality <= 1.0:
        raise ValidationError(f"criticality {criticality} outside [0,1]")
    return (
        criticality >= policy.score_threshold
        or dependency_report.transitive_dependents >= policy.dependents_threshold
    )


def apply_attestations(
    attestations: Sequence[Attestation],
    registry: MetricRegistry,
    critical: bool,
    as_of: datetime,
) -> list[MetricObservation]:
    """Qualitative observations from attestations, gated on the critical flag.

    Non-critical projects yield nothing. Per qualitative metric, the newest
    attestation that is already asserted and not expired at as_of wins and
    becomes one ordinal observation sourced from the attestation id.
    """
    if not critical:
        return []
    newest: dict[str, Attestation] = {}
    for att in attestations:
        definition = registry.get(att.metric_id)
        if definition.kind != "qualitative":
            raise ValidationError(f"attestation {att.id} targets non-qualitative metric {att.metric_id}")
        if att.asserted_at > as_of:
            continue
        if att.expires_at is not None and att.expires_at <= as_of:
            continue
        cur = newest.get(att.metric_id)
        if cur is None or (att.asserted_at, att.id) > (cur.asserted_at, cur.id):
            newest[att.metric_id] = att
    return [
        MetricObservation(
            metric_id=att.metric_id,
            project=att.project,
            value=ObservationValue.ordinal(att.value),
            observed_at=att.asserted_at,
            source=att.id,
        )
        for att in newest.values()
    ]


def observation_digest(observations: Sequence[MetricObservation]) -> str:
    """Stable hash of (metric_id, value, observed_at) triples, sorted."""
    triples = sorted(
        (obs.metric_id, json.dumps(obs.value.to_dict(), sort_keys=True), format_ts(obs.observed_at))
        for obs in observations
    )
    blob = json.dumps(triples, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def default_category_weights(registry: MetricRegistry) -> dict[str, dict[str, float]]:
    """Per-focus weight maps from the registry's shipped defaults."""
    weights: dict[str, dict[str, float]] = {focus: {} for focus in SCORED_CATEGORIES}
    for definition in registry:
        if definition.focus in weights:
            weights[definition.focus][definition.id] = registry.default_weights.get(definition.id, 1.0)
    return weights


def build_snapshot(
    project: str,
    observations: Sequence[MetricObservation],
    dependency_report: DependencyReport,
    params: CriticalityParams,
    as_of: datetime,
    registry: MetricRegistry | None = None,
    category_weights: Mapping[str, Mapping[str, float]] | None = None,
) -> HealthSnapshot:
    """Assemble the per-project snapshot: criticality, categories, critical flag.

    The signal vector is built from the latest observation of each configured
    signal metric; absent signals count as 0. Pure: equal inputs yield equal
    snapshots including the input digest.
    """
    for obs in observations:
        if obs.project != project:
            raise ValidationError(f"observation for {obs.project} mixed into snapshot of {project}")
    registry = registry or default_registry()
    weights = category_weights if category_weights is not None else default_category_weights(registry)
    latest = _latest_numeric(observations)
    signals = SignalVector(
        values={
            name: float(latest[name].value.raw) if name in latest else 0.0
            for name in params.signals
        }
    )
    criticality = criticality_score(signals, params)
    scores: dict[str, float] = {}
    for focus in SCORED_CATEGORIES:
        score = category_score(observations, registry, weights.get(focus, {}), focus)
        if score is not None:
            scores[focus] = score
    return HealthSnapshot(
        project=project,
        computed_at=as_of,
        category_scores=scores,
        criticality=criticality,
        is_critical=is_critical(criticality, dependency_report, params.critical_policy),
        input_digest=observation_digest(observations),
    )


def score_project(
    project: str,
    quantitative: Sequence[MetricObservation],
    attestations: Sequence[Attestation],
    dependency_report: DependencyReport,
    params: CriticalityParams,
    as_of: datetime,
    registry: MetricRegistry | None = None,
    category_weights: Mapping[str, Mapping[str, float]] | None = None,
) -> tuple[HealthSnapshot, list[MetricObservation]]:
    """Full scoring pipeline step for one project.

    Criticality is computed from quantitative signals first; only when the
    project comes out critical do attestations materialize as qualitative
    observations, which then enter the category scores and the digest.
    Returns the snapshot and the qualitative observations it incorporated.
    """
    registry = registry or default_registry()
    latest = _latest_numeric(quantitative)
    signals = SignalVector(
        values={
            name: float(latest[name].value.raw) if name in latest else 0.0
            for name in params.signals
        }
    )
    criticality = criticality_score(signals, params)
    critical = is_critical(criticality, dependency_report, params.critical_policy)
    qualitative = apply_attestations(attestations, registry, critical, as_of)
    merged = list(quantitative) + qualitative
    snapshot = build_snapshot(
        project, merged, dependency_report, params, as_of, registry, category_weights
    )
    return snapshot, qualitative
