"""Refresh scheduling, change detection between snapshots, and push alerts.

Rule evaluation is pure; delivery is at-least-once (webhook consumers must
deduplicate by alert id, which is deterministic per alert key). Alert storms
are prevented by keying every alert on the new snapshot's input digest:
replaying the same transition can never emit a second alert.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import requests

from .errors import StorageError, ValidationError
from .model import (
    HealthSnapshot,
    MetricObservation,
    ProjectRecord,
    VulnerabilityRecord,
    parse_canonical_id,
)
from .timeutil import format_ts, parse_ts

NEW_HIGH_VULN = "NEW_HIGH_VULN"
BECAME_CRITICAL = "BECAME_CRITICAL"
ACTIVITY_DROP = "ACTIVITY_DROP"
LICENSE_CHANGED = "LICENSE_CHANGED"
RULE_IDS = frozenset({NEW_HIGH_VULN, BECAME_CRITICAL, ACTIVITY_DROP, LICENSE_CHANGED})

DEFAULT_ACTIVITY_DROP_FRACTION = 0.5
DELIVERY_MAX_ATTEMPTS = 5
WEBHOOK_RULE_HEADER = "X-CrOSSD-Rule"


@dataclass(frozen=True, slots=True)
class Delivery:
    """Where a subscription's alerts go: a webhook URI or the local alert log."""

    kind: str  # "webhook" | "log_sink"
    url: str | None = None

    def __post_init__(self):
        if self.kind == "webhook":
            if not self.url:
                raise ValidationError("webhook delivery requires a URL")
        elif self.kind == "log_sink":
            if self.url is not None:
                raise ValidationError("log_sink delivery takes no URL")
        else:
            raise ValidationError(f"unknown delivery kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"webhook": self.url} if self.kind == "webhook" else {"log_sink": True}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Delivery":
        if "webhook" in d:
            return cls(kind="webhook", url=d["webhook"])
        if "log_sink" in d:
            return cls(kind="log_sink")
        raise ValidationError(f"unknown delivery spec {dict(d)!r}")


@dataclass(frozen=True, slots=True)
class WatchlistSubscription:
    """Projects and rules one subscriber watches, with a delivery channel."""

    id: str
    subscriber: str
    projects: frozenset[str]
    rules: frozenset[str]
    delivery: Delivery

    def __post_init__(self):
        if not self.id or not self.subscriber:
            raise ValidationError("subscription needs id and subscriber")
        if not self.projects:
            raise ValidationError("subscription must watch at least one project")
        for project in self.projects:
            parse_canonical_id(project)
        unknown = self.rules - RULE_IDS
        if unknown:
            raise ValidationError(f"unknown rules: {sorted(unknown)}")
        if not self.rules:
            raise ValidationError("subscription must register at least one rule")
        object.__setattr__(self, "projects", frozenset(self.projects))
        object.__setattr__(self, "rules", frozenset(self.rules))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "subscriber": self.subscriber,
            "projects": sorted(self.projects),
            "rules": sorted(self.rules),
            "delivery": self.delivery.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "WatchlistSubscription":
        return cls(
            id=d["id"],
            subscriber=d["subscriber"],
            projects=frozenset(d["projects"]),
            rules=frozenset(d["rules"]),
            delivery=Delivery.from_dict(d["delivery"]),
        )


@dataclass(frozen=True, slots=True)
class Alert:
    """One rule firing for one subscription; id is deterministic per key."""

    id: str
    subscription_id: str
    project: str
    rule: str
    triggered_at: datetime
    payload: Mapping[str, Any]
    delivery_state: str = "pending"  # pending | delivered | failed

    def __post_init__(self):
        if self.delivery_state not in ("pending", "delivered", "failed"):
            raise ValidationError(f"bad delivery_state {self.delivery_state!r}")
        if self.rule not in RULE_IDS:
            raise ValidationError(f"unknown rule {self.rule!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "subscription_id": self.subscription_id,
            "project": self.project,
            "rule": self.rule,
            "triggered_at": format_ts(self.triggered_at),
            "payload": dict(self.payload),
            "delivery_state": self.delivery_state,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Alert":
        return cls(
            id=d["id"],
            subscription_id=d["subscription_id"],
            project=d["project"],
            rule=d["rule"],
            triggered_at=parse_ts(d["triggered_at"]),
            payload=dict(d.get("payload") or {}),
            delivery_state=d.get("delivery_state", "pending"),
        )

    def webhook_body(self) -> dict[str, Any]:
        return {
            "alert_id": self.id,
            "project": self.project,
            "rule": self.rule,
            "triggered_at": format_ts(self.triggered_at),
            "payload": dict(self.payload),
        }


def alert_key(subscription_id: str, project: str, rule: str, snapshot_digest: str) -> tuple:
    return (subscription_id, project, rule, snapshot_digest)


def alert_id_for(key: tuple) -> str:
    return hashlib.sha256("|".join(key).encode("utf-8")).hexdigest()[:20]


# -- scheduling -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PlanEntry:
    cadence_seconds: float
    next_due: datetime

    def __post_init__(self):
        if self.cadence_seconds <= 0:
            raise ValidationError("cadence must be positive")


@dataclass(frozen=True, slots=True)
class RefreshPlan:
    entries: Mapping[str, PlanEntry]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))


def build_refresh_plan(
    projects: Iterable[tuple[str, bool]],
    now: datetime,
    normal_cadence: timedelta,
    critical_cadence: timedelta,
) -> RefreshPlan:
    """Initial plan: everything due immediately; critical projects refresh at
    least as often as non-critical ones."""
    if critical_cadence > normal_cadence:
        raise ValidationError("critical cadence must be <= normal cadence")
    entries = {}
    for project, critical in projects:
        cadence = critical_cadence if critical else normal_cadence
        entries[project] = PlanEntry(cadence_seconds=cadence.total_seconds(), next_due=now)
    return RefreshPlan(entries=entries)


def tick(now: datetime, plan: RefreshPlan) -> tuple[list[str], RefreshPlan]:
    """Projects due at `now` (next_due <= now), with their next_due re-anchored
    to now + cadence so that delays never accumulate drift."""
    due = sorted(p for p, e in plan.entries.items() if e.next_due <= now)
    if not due:
        return [], plan
    entries = dict(plan.entries)
    for project in due:
        entry = entries[project]
        entries[project] = replace(
            entry, next_due=now + timedelta(seconds=entry.cadence_seconds)
        )
    return due, RefreshPlan(entries=entries)


# -- rule evaluation ----------------------------------------------------------


def _latest_value(observations: Sequence[MetricObservation], metric_id: str) -> float | None:
    best: MetricObservation | None = None
    for obs in observations:
        if obs.metric_id != metric_id or obs.value.kind == "text":
            continue
        if best is None or (obs.observed_at, obs.source) > (best.observed_at, best.source):
            best = obs
    return float(best.value.raw) if best is not None else None


def evaluate_rules(
    prev: HealthSnapshot | None,
    next: HealthSnapshot,
    prev_vulns: Sequence[VulnerabilityRecord] = (),
    next_vulns: Sequence[VulnerabilityRecord] = (),
    prev_record: ProjectRecord | None = None,
    next_record: ProjectRecord | None = None,
    prev_observations: Sequence[MetricObservation] = (),
    next_observations: Sequence[MetricObservation] = (),
    activity_drop_fraction: float = DEFAULT_ACTIVITY_DROP_FRACTION,
) -> list[tuple[str, dict[str, Any]]]:
    """Built-in critical-situation rules between two consecutive snapshots.

    Rules are independent; several may fire for one transition. Returns
    (rule_id, payload) pairs sorted by rule id.
    """
    if prev is not None and prev.project != next.project:
        raise ValidationError("prev and next snapshots must be for the same project")
    findings: list[tuple[str, dict[str, Any]]] = []

    prev_ids = {v.vuln_id for v in prev_vulns}
    new_high = sorted(
        v.vuln_id
        for v in next_vulns
        if v.severity in ("high", "critical") and v.vuln_id not in prev_ids
    )
    if new_high:
        findings.append((NEW_HIGH_VULN, {"new_vuln_ids": new_high, "count": len(new_high)}))

    if next.is_critical and (prev is None or not prev.is_critical):
        findings.append((BECAME_CRITICAL, {"criticality": next.criticality}))

    prev_commits = _latest_value(prev_observations, "commits_90d")
    next_commits = _latest_value(next_observations, "commits_90d")
    if (
        prev_commits is not None
        and next_commits is not None
        and prev_commits > 0
        and next_commits < (1.0 - activity_drop_fraction) * prev_commits
    ):
        findings.append(
            (ACTIVITY_DROP, {"previous_commits_90d": prev_commits, "current_commits_90d": next_commits})
        )

    if prev_record is not None and next_record is not None and prev_record.license != next_record.license:
        findings.append(
            (LICENSE_CHANGED, {"previous_license": prev_record.license, "current_license": next_record.license})
        )

    return sorted(findings, key=lambda f: f[0])


def fan_out(
    findings: Sequence[tuple[str, str, dict[str, Any]]],
    subscriptions: Sequence[WatchlistSubscription],
    snapshot_digests: Mapping[str, str],
    triggered_at: datetime,
    seen_keys: Iterable[tuple] = (),
) -> list[Alert]:
    """One Alert per subscription watching the project and registering the rule.

    Duplicate (subscription, project, rule, snapshot digest) keys, including
    any in seen_keys, are suppressed.
    """
    seen = set(seen_keys)
    alerts: list[Alert] = []
    for project, rule, payload in findings:
        digest = snapshot_digests.get(project, "")
        for sub in sorted(subscriptions, key=lambda s: s.id):
            if project not in sub.projects or rule not in sub.rules:
                continue
            key = alert_key(sub.id, project, rule, digest)
            if key in seen:
                continue
            seen.add(key)
            alerts.append(
                Alert(
                    id=alert_id_for(key),
                    subscription_id=sub.id,
                    project=project,
                    rule=rule,
                    triggered_at=triggered_at,
                    # The digest rides along so restarted monitors can rebuild
                    # their dedup set from the alert log alone.
                    payload={**payload, "snapshot_digest": digest},
                )
            )
    return alerts


# -- delivery -----------------------------------------------------------------


class AlertLog:
    """Newline-delimited JSON alert log; the log_sink delivery target."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, alert: Alert) -> None:
        line = json.dumps(alert.to_dict(), sort_keys=True, separators=(",", ":"))
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self._lock, self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append alert to {self.path}: {exc}") from None

    def read_all(self) -> list[Alert]:
        if not self.path.is_file():
            return []
        alerts = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                alerts.append(Alert.from_dict(json.loads(line)))
        return alerts


def deliver(
    alert: Alert,
    delivery: Delivery,
    alert_log: AlertLog,
    *,
    session: requests.Session | None = None,
    sleep_fn: Callable[[float], None] = time.sleep,
    backoff_base: float = 0.5,
    backoff_cap: float = 30.0,
    max_attempts: int = DELIVERY_MAX_ATTEMPTS,
) -> str:
    """Push one alert; returns the final delivery state.

    Webhook targets get the alert JSON POSTed with the rule header; non-2xx
    answers are retried with exponential backoff up to max_attempts, after
    which the alert is marked failed. The log sink always succeeds. Delivery
    failures are recorded, never raised.
    """
    if delivery.kind == "log_sink":
        alert_log.append(replace(alert, delivery_state="delivered"))
        return "delivered"
    session = session or requests.Session()
    state = "failed"
    for attempt in range(1, max_attempts + 1):
        try:
            resp = session.post(
                delivery.url,
                json=alert.webhook_body(),
                headers={WEBHOOK_RULE_HEADER: alert.rule},
                timeout=30,
            )
            if 200 <= resp.status_code < 300:
                state = "delivered"
                break
        except requests.RequestException:
            pass
        if attempt < max_attempts:
            sleep_fn(min(backoff_cap, backoff_base * 2 ** (attempt - 1)))
    alert_log.append(replace(alert, delivery_state=state))
    return state
