"""Orchestration: fixtures/live facts into the store, stored facts into snapshots.

The CLI, the API service and the monitor all drive the same three steps:
ingest (collect + validate + append), score (latest facts -> snapshot), and
refresh (rescore due projects, diff consecutive snapshots, push alerts).
Every step takes an explicit as_of instant, so a fixed --as-of makes the
whole pipeline deterministic.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Mapping, Sequence

import requests

from .collectors import CodeHostClient, collect_fixture, list_bundle_projects
from .engine import (
    DependencyReport,
    compute_quantitative,
    dependency_analysis,
    score_project,
)
from .errors import NotFound, ValidationError
from .model import (
    CriticalityParams,
    HealthSnapshot,
    MetricRegistry,
    ProjectRef,
    parse_canonical_id,
)
from .monitor import (
    Alert,
    AlertLog,
    WatchlistSubscription,
    alert_key,
    deliver,
    evaluate_rules,
    fan_out,
)
from .store import HealthStore

logger = logging.getLogger(__name__)

FIXTURE_SOURCE = "fixture"
CODE_HOST_SOURCE = "code-host"


@dataclass
class IngestReport:
    projects: list[str] = field(default_factory=list)
    inserted: int = 0
    deduplicated: int = 0


def ingest_bundle(
    store: HealthStore,
    bundle_path,
    registry: MetricRegistry,
    as_of: datetime,
    project: ProjectRef | None = None,
    source: str = FIXTURE_SOURCE,
) -> IngestReport:
    """Collect fixture projects, validate them, and append everything.

    Raw facts (records, vulnerabilities, dependency edges, attestations) are
    stored first so that dependency analysis sees the full graph, then each
    project's quantitative observations are computed and appended.
    """
    refs = [project] if project is not None else list_bundle_projects(bundle_path)
    if not refs:
        raise NotFound(f"no projects found in bundle {bundle_path}")
    results = {ref.canonical_id: collect_fixture(bundle_path, ref) for ref in refs}

    report = IngestReport()
    for canonical_id, result in results.items():
        store.put_project_record(result.record)
        store.put_vulnerabilities(canonical_id, result.vulns, recorded_at=as_of)
        store.put_dependency_edges(canonical_id, result.deps, recorded_at=as_of)
        for attestation in result.attestations:
            if attestation.metric_id not in registry or registry.get(attestation.metric_id).kind != "qualitative":
                raise ValidationError(
                    f"attestation {attestation.id} for {canonical_id} targets "
                    f"non-qualitative or unknown metric {attestation.metric_id!r}"
                )
            store.put_attestation(attestation)

    edges = store.dependency_edges(as_of=as_of)
    global_vulns = store.all_vulnerabilities(as_of=as_of)
    for canonical_id, result in results.items():
        deps_report = dependency_analysis(edges, canonical_id, runtime_only=True, vulns=global_vulns)
        own_vulns = store.vulnerabilities(canonical_id, as_of=as_of)
        observations = compute_quantitative(result.stats, deps_report, own_vulns, as_of, source=source)
        counts = store.put_observations(observations, registry=registry)
        report.projects.append(canonical_id)
        report.inserted += counts["inserted"]
        report.deduplicated += counts["deduplicated"]
    return report


def dependency_report_for(store: HealthStore, project: str, as_of: datetime | None = None) -> DependencyReport:
    edges = store.dependency_edges(as_of=as_of)
    return dependency_analysis(
        edges, project, runtime_only=True, vulns=store.all_vulnerabilities(as_of=as_of)
    )


def score_stored(
    store: HealthStore,
    project: str,
    registry: MetricRegistry,
    params: CriticalityParams,
    as_of: datetime,
    category_weights: Mapping[str, Mapping[str, float]] | None = None,
) -> HealthSnapshot:
    """Build and persist a snapshot from the latest stored facts at as_of.

    Qualitative observations are always re-derived from attestations (never
    from previously stored qualitative rows), so rescoring at the same
    instant is idempotent and yields an identical digest.
    """
    parse_canonical_id(project)
    quantitative = [
        obs
        for obs in store.latest_observations(project, as_of=as_of)
        if obs.metric_id in registry and registry.get(obs.metric_id).kind == "quantitative"
    ]
    deps_report = dependency_report_for(store, project, as_of=as_of)
    snapshot, qualitative = score_project(
        project,
        quantitative,
        store.attestations(project),
        deps_report,
        params,
        as_of,
        registry,
        category_weights,
    )
    if qualitative:
        store.put_observations(qualitative, registry=registry)
    store.put_snapshot(snapshot)
    return snapshot


def refresh_live(
    store: HealthStore,
    base_url: str,
    auth_token: str,
    project: ProjectRef,
    registry: MetricRegistry,
    as_of: datetime,
    **client_options,
) -> dict:
    """Crawl one project from a code host and append the results."""
    client = CodeHostClient(base_url, auth_token, **client_options)
    result = client.collect(project)
    if not result.complete:
        raise ValidationError(
            f"collection of {project.canonical_id} did not complete within the request budget"
        )
    store.put_project_record(result.record)
    deps_report = dependency_report_for(store, project.canonical_id, as_of=as_of)
    own_vulns = store.vulnerabilities(project.canonical_id, as_of=as_of)
    observations = compute_quantitative(
        result.stats, deps_report, own_vulns, as_of, source=CODE_HOST_SOURCE
    )
    return store.put_observations(observations, registry=registry)


class MonitorService:
    """Drives rescoring of due projects and pushes alerts to subscribers.

    Alert deduplication keys are seeded from the alert log, so a restarted
    monitor never re-emits alerts for transitions it already reported.
    """

    def __init__(
        self,
        store: HealthStore,
        registry: MetricRegistry,
        params: CriticalityParams,
        alert_log: AlertLog,
        category_weights: Mapping[str, Mapping[str, float]] | None = None,
        activity_drop_fraction: float = 0.5,
        webhook_session: requests.Session | None = None,
        sleep_fn: Callable[[float], None] | None = None,
        delivery_backoff_base: float = 0.5,
        delivery_workers: int = 4,
    ):
        self.store = store
        self.registry = registry
        self.params = params
        self.category_weights = category_weights
        self.alert_log = alert_log
        self.activity_drop_fraction = activity_drop_fraction
        self.webhook_session = webhook_session
        self.sleep_fn = sleep_fn
        self.delivery_backoff_base = delivery_backoff_base
        self.delivery_workers = max(1, delivery_workers)
        self._seen_keys: set[tuple] = {
            alert_key(a.subscription_id, a.project, a.rule, a.payload.get("snapshot_digest", ""))
            for a in alert_log.read_all()
        }

    def subscriptions(self) -> list[WatchlistSubscription]:
        subs = []
        for payload in self.store.watchlists():
            try:
                subs.append(WatchlistSubscription.from_dict(payload))
            except ValidationError as exc:
                logger.warning("skipping malformed subscription %s: %s", payload.get("id"), exc)
        return subs

    def refresh_projects(self, projects: Sequence[str], as_of: datetime) -> list[Alert]:
        """Rescore the given projects at as_of, diff against their previous
        snapshots, fan out matching alerts and deliver them."""
        findings: list[tuple[str, str, dict]] = []
        digests: dict[str, str] = {}
        for project in projects:
            prev = self.store.get_latest_snapshot(project)
            prev_vulns = (
                self.store.vulnerabilities(project, as_of=prev.computed_at) if prev else []
            )
            prev_record = (
                self.store.get_project_record(project, as_of=prev.computed_at) if prev else None
            )
            prev_obs = (
                self.store.latest_observations(project, as_of=prev.computed_at) if prev else []
            )
            next_snapshot = score_stored(
                self.store, project, self.registry, self.params, as_of, self.category_weights
            )
            next_vulns = self.store.vulnerabilities(project, as_of=as_of)
            next_record = self.store.get_project_record(project, as_of=as_of)
            next_obs = self.store.latest_observations(project, as_of=as_of)
            digests[project] = next_snapshot.input_digest
            for rule, payload in evaluate_rules(
                prev,
                next_snapshot,
                prev_vulns,
                next_vulns,
                prev_record,
                next_record,
                prev_obs,
                next_obs,
                activity_drop_fraction=self.activity_drop_fraction,
            ):
                findings.append((project, rule, payload))

        subscriptions = self.subscriptions()
        alerts = fan_out(findings, subscriptions, digests, as_of, seen_keys=self._seen_keys)
        sub_by_id = {s.id: s for s in subscriptions}
        pending: list[Alert] = []
        for alert in alerts:
            self._seen_keys.add(
                alert_key(alert.subscription_id, alert.project, alert.rule, digests.get(alert.project, ""))
            )
            if alert.subscription_id in sub_by_id:
                pending.append(alert)

        def push(alert: Alert) -> str:
            kwargs = {}
            if self.webhook_session is not None:
                kwargs["session"] = self.webhook_session
            if self.sleep_fn is not None:
                kwargs["sleep_fn"] = self.sleep_fn
            return deliver(
                alert,
                sub_by_id[alert.subscription_id].delivery,
                self.alert_log,
                backoff_base=self.delivery_backoff_base,
                **kwargs,
            )

        if not pending:
            return []
        # Bounded worker pool: one slow webhook must not stall the loop.
        with ThreadPoolExecutor(max_workers=self.delivery_workers) as pool:
            states = list(pool.map(push, pending))
        return [
            Alert(
                id=alert.id,
                subscription_id=alert.subscription_id,
                project=alert.project,
                rule=alert.rule,
                triggered_at=alert.triggered_at,
                payload=alert.payload,
                delivery_state=state,
            )
            for alert, state in zip(pending, states)
        ]
