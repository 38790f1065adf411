"""Durable append-only store for observations, snapshots, records and facts.

Reference layout: one newline-delimited JSON segment file per project under
<root>/projects/, each line a schema-tagged record, plus a global watchlist
event log. An in-memory index is rebuilt at startup. Nothing is ever mutated
or deleted; duplicate keys are deduplicated on ingestion, which makes corpus
replays idempotent.

Concurrency: one writer at a time per store instance; a store-wide lock
serializes mutations and keeps readers from observing a partially written
batch.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence
from urllib.parse import quote

from .errors import StorageError, ValidationError
from .model import (
    Attestation,
    DependencyEdge,
    HealthSnapshot,
    MetricObservation,
    MetricRegistry,
    ProjectRecord,
    validate_observation,
)
from .timeutil import format_ts, parse_ts

MAX_PAGE_LIMIT = 500

_KIND_ORDER = (
    "project_record",
    "observation",
    "snapshot",
    "vulnerability",
    "dependency_edges",
    "attestation",
)


def _digest(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _dump_line(envelope: dict[str, Any]) -> str:
    return json.dumps(envelope, sort_keys=True, separators=(",", ":"))


@dataclass
class _VersionedVuln:
    recorded_at: datetime
    record: Any  # VulnerabilityRecord
    content_key: str


@dataclass
class _EdgeSet:
    recorded_at: datetime
    edges: tuple[DependencyEdge, ...]
    content_key: str


@dataclass
class _ProjectState:
    records: list[ProjectRecord] = field(default_factory=list)
    record_keys: set[tuple] = field(default_factory=set)
    observations: list[MetricObservation] = field(default_factory=list)
    obs_keys: set[tuple] = field(default_factory=set)
    snapshots: list[HealthSnapshot] = field(default_factory=list)
    snap_keys: set[tuple] = field(default_factory=set)
    vulns: list[_VersionedVuln] = field(default_factory=list)
    vuln_keys: set[tuple] = field(default_factory=set)
    edge_sets: list[_EdgeSet] = field(default_factory=list)
    edge_keys: set[tuple] = field(default_factory=set)
    attestations: list[Attestation] = field(default_factory=list)
    att_keys: set[tuple] = field(default_factory=set)


class HealthStore:
    """Append-only project health database with historical queries."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.projects_dir = self.root / "projects"
        self.watchlist_file = self.root / "watchlists.ndjson"
        self._lock = threading.RLock()
        self._projects: dict[str, _ProjectState] = {}
        self._watchlist_events: list[dict[str, Any]] = []
        self._watchlists: dict[str, dict[str, Any]] = {}
        try:
            self.projects_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store at {self.root}: {exc}") from None
        self._load()

    # -- startup ---------------------------------------------------------

    def _load(self) -> None:
        for segment in sorted(self.projects_dir.glob("*.ndjson")):
            self._replay_file(segment)
        if self.watchlist_file.is_file():
            self._replay_file(self.watchlist_file)

    def _replay_file(self, path: Path) -> None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                envelope = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageError(f"{path}:{lineno}: corrupt record: {exc}") from None
            try:
                self._apply(envelope, persist=False)
            except (ValidationError, KeyError, TypeError) as exc:
                raise StorageError(f"{path}:{lineno}: invalid record: {exc}") from None

    # -- low-level appends ------------------------------------------------

    def _segment_path(self, project: str) -> Path:
        return self.projects_dir / (quote(project, safe="") + ".ndjson")

    def _append(self, path: Path, envelopes: Sequence[dict[str, Any]]) -> None:
        if not envelopes:
            return
        try:
            with path.open("a", encoding="utf-8") as fh:
                for envelope in envelopes:
                    fh.write(_dump_line(envelope) + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageError(f"cannot append to {path}: {exc}") from None

    def _state(self, project: str) -> _ProjectState:
        state = self._projects.get(project)
        if state is None:
            state = _ProjectState()
            self._projects[project] = state
        return state

    # -- ingestion (the single-writer surface) ----------------------------

    def _apply(self, envelope: dict[str, Any], persist: bool = True) -> bool:
        """Index one schema-tagged record; append it when new and persist is set.

        Returns True when the record was new, False when deduplicated.
        """
        kind = envelope.get("kind")
        if kind == "watchlist":
            return self._apply_watchlist(envelope, persist)

        data = envelope["data"]
        if kind == "project_record":
            record = ProjectRecord.from_dict(data)
            project = record.ref.canonical_id
            state = self._state(project)
            key = (project, format_ts(record.fetched_at), _digest(data))
            if key in state.record_keys:
                return False
            state.record_keys.add(key)
            state.records.append(record)
            state.records.sort(key=lambda r: r.fetched_at)
        elif kind == "observation":
            obs = MetricObservation.from_dict(data)
            project = obs.project
            state = self._state(project)
            key = (obs.project, obs.metric_id, format_ts(obs.observed_at), obs.source)
            if key in state.obs_keys:
                return False
            state.obs_keys.add(key)
            state.observations.append(obs)
        elif kind == "snapshot":
            snap = HealthSnapshot.from_dict(data)
            project = snap.project
            state = self._state(project)
            key = (snap.project, format_ts(snap.computed_at), snap.input_digest)
            if key in state.snap_keys:
                return False
            state.snap_keys.add(key)
            state.snapshots.append(snap)
        elif kind == "vulnerability":
            from .model import VulnerabilityRecord

            project = envelope["project"]
            recorded_at = parse_ts(envelope["recorded_at"])
            record = VulnerabilityRecord.from_dict(data)
            state = self._state(project)
            key = (project, record.vuln_id, _digest(data))
            if key in state.vuln_keys:
                return False
            state.vuln_keys.add(key)
            state.vulns.append(_VersionedVuln(recorded_at, record, key[2]))
        elif kind == "dependency_edges":
            project = envelope["project"]
            recorded_at = parse_ts(envelope["recorded_at"])
            edges = tuple(DependencyEdge.from_dict(e) for e in data["edges"])
            state = self._state(project)
            key = (project, envelope["recorded_at"], _digest(data))
            if key in state.edge_keys:
                return False
            state.edge_keys.add(key)
            state.edge_sets.append(_EdgeSet(recorded_at, edges, key[2]))
            state.edge_sets.sort(key=lambda s: s.recorded_at)
        elif kind == "attestation":
            att = Attestation.from_dict(data)
            project = att.project
            state = self._state(project)
            key = (project, att.id, _digest(data))
            if key in state.att_keys:
                return False
            state.att_keys.add(key)
            state.attestations.append(att)
        else:
            raise ValidationError(f"unknown record kind {kind!r}")

        if persist:
            self._append(self._segment_path(project), [envelope])
        return True

    def _apply_watchlist(self, envelope: dict[str, Any], persist: bool) -> bool:
        action = envelope.get("action")
        data = envelope.get("data") or {}
        sub_id = data.get("id")
        if action not in ("create", "delete") or not sub_id:
            raise ValidationError("watchlist event needs action create/delete and data.id")
        if action == "create":
            self._watchlists[sub_id] = data
        else:
            self._watchlists.pop(sub_id, None)
        self._watchlist_events.append(envelope)
        if persist:
            self._append(self.watchlist_file, [envelope])
        return True

    def put_observations(
        self, batch: Sequence[MetricObservation], registry: MetricRegistry | None = None
    ) -> dict[str, int]:
        """Append a validated batch atomically; duplicates are counted, not errors."""
        for obs in batch:
            if not isinstance(obs, MetricObservation):
                raise ValidationError(f"not a MetricObservation: {obs!r}")
            if registry is not None:
                validate_observation(obs, registry)
        inserted = 0
        deduplicated = 0
        with self._lock:
            pending: dict[str, list[dict[str, Any]]] = {}
            staged_keys: set[tuple] = set()
            for obs in batch:
                key = (obs.project, obs.metric_id, format_ts(obs.observed_at), obs.source)
                state = self._state(obs.project)
                if key in state.obs_keys or key in staged_keys:
                    deduplicated += 1
                    continue
                staged_keys.add(key)
                pending.setdefault(obs.project, []).append(
                    {"kind": "observation", "data": obs.to_dict()}
                )
            for project, envelopes in pending.items():
                self._append(self._segment_path(project), envelopes)
                for envelope in envelopes:
                    obs = MetricObservation.from_dict(envelope["data"])
                    state = self._state(project)
                    state.obs_keys.add(
                        (obs.project, obs.metric_id, format_ts(obs.observed_at), obs.source)
                    )
                    state.observations.append(obs)
                    inserted += 1
        return {"inserted": inserted, "deduplicated": deduplicated}

    def put_snapshot(self, snapshot: HealthSnapshot) -> bool:
        with self._lock:
            return self._apply({"kind": "snapshot", "data": snapshot.to_dict()})

    def put_project_record(self, record: ProjectRecord) -> bool:
        with self._lock:
            return self._apply({"kind": "project_record", "data": record.to_dict()})

    def put_vulnerabilities(self, project: str, vulns: Iterable, recorded_at: datetime) -> int:
        inserted = 0
        with self._lock:
            for record in vulns:
                envelope = {
                    "kind": "vulnerability",
                    "project": project,
                    "recorded_at": format_ts(recorded_at),
                    "data": record.to_dict(),
                }
                if self._apply(envelope):
                    inserted += 1
        return inserted

    def put_dependency_edges(
        self, project: str, edges: Sequence[DependencyEdge], recorded_at: datetime
    ) -> bool:
        envelope = {
            "kind": "dependency_edges",
            "project": project,
            "recorded_at": format_ts(recorded_at),
            "data": {"edges": [e.to_dict() for e in edges]},
        }
        with self._lock:
            return self._apply(envelope)

    def put_attestation(self, attestation: Attestation) -> bool:
        with self._lock:
            return self._apply({"kind": "attestation", "data": attestation.to_dict()})

    # -- watchlists --------------------------------------------------------

    def put_watchlist(self, payload: dict[str, Any]) -> None:
        with self._lock:
            self._apply_watchlist({"kind": "watchlist", "action": "create", "data": payload}, persist=True)

    def delete_watchlist(self, sub_id: str) -> bool:
        with self._lock:
            if sub_id not in self._watchlists:
                return False
            self._apply_watchlist(
                {"kind": "watchlist", "action": "delete", "data": {"id": sub_id}}, persist=True
            )
            return True

    def get_watchlist(self, sub_id: str) -> dict[str, Any] | None:
        with self._lock:
            payload = self._watchlists.get(sub_id)
            return dict(payload) if payload else None

    def watchlists(self) -> list[dict[str, Any]]:
        with self._lock:
            return [dict(p) for p in self._watchlists.values()]

    # -- queries -----------------------------------------------------------

    def projects(self) -> list[str]:
        """Canonical ids of every project with at least one project record."""
        with self._lock:
            return sorted(p for p, s in self._projects.items() if s.records)

    def get_project_record(self, project: str, as_of: datetime | None = None) -> ProjectRecord | None:
        with self._lock:
            state = self._projects.get(project)
            if not state or not state.records:
                return None
            eligible = state.records if as_of is None else [r for r in state.records if r.fetched_at <= as_of]
            return eligible[-1] if eligible else None

    def get_latest_snapshot(self, project: str, as_of: datetime | None = None) -> HealthSnapshot | None:
        """Snapshot with max computed_at; ties broken by input_digest (greater wins)."""
        with self._lock:
            state = self._projects.get(project)
            if not state or not state.snapshots:
                return None
            eligible = (
                state.snapshots
                if as_of is None
                else [s for s in state.snapshots if s.computed_at <= as_of]
            )
            if not eligible:
                return None
            return max(eligible, key=lambda s: (s.computed_at, s.input_digest))

    def query_history(
        self, project: str, metric_id: str, from_ts: datetime, to_ts: datetime
    ) -> list[MetricObservation]:
        """Observations with from <= observed_at < to, ordered by time then source."""
        if from_ts > to_ts:
            raise ValidationError("query_history requires from <= to")
        with self._lock:
            state = self._projects.get(project)
            if not state:
                return []
            hits = [
                o
                for o in state.observations
                if o.metric_id == metric_id and from_ts <= o.observed_at < to_ts
            ]
        return sorted(hits, key=lambda o: (o.observed_at, o.source))

    def latest_observation(
        self, project: str, metric_id: str, as_of: datetime | None = None
    ) -> MetricObservation | None:
        with self._lock:
            state = self._projects.get(project)
            if not state:
                return None
            hits = [
                o
                for o in state.observations
                if o.metric_id == metric_id and (as_of is None or o.observed_at <= as_of)
            ]
        if not hits:
            return None
        return max(hits, key=lambda o: (o.observed_at, o.source))

    def latest_observations(self, project: str, as_of: datetime | None = None) -> list[MetricObservation]:
        """Latest observation per metric id at or before as_of."""
        with self._lock:
            state = self._projects.get(project)
            if not state:
                return []
            latest: dict[str, MetricObservation] = {}
            for o in state.observations:
                if as_of is not None and o.observed_at > as_of:
                    continue
                cur = latest.get(o.metric_id)
                if cur is None or (o.observed_at, o.source) > (cur.observed_at, cur.source):
                    latest[o.metric_id] = o
        return [latest[k] for k in sorted(latest)]

    def vulnerabilities(self, project: str, as_of: datetime | None = None) -> list:
        """Latest version of each vulnerability recorded at or before as_of."""
        with self._lock:
            state = self._projects.get(project)
            if not state:
                return []
            latest: dict[str, _VersionedVuln] = {}
            for vv in state.vulns:
                if as_of is not None and vv.recorded_at > as_of:
                    continue
                cur = latest.get(vv.record.vuln_id)
                if cur is None or (vv.recorded_at, vv.content_key) > (cur.recorded_at, cur.content_key):
                    latest[vv.record.vuln_id] = vv
        return [latest[k].record for k in sorted(latest)]

    def all_vulnerabilities(self, as_of: datetime | None = None) -> list:
        with self._lock:
            project_ids = list(self._projects)
        out = []
        for project in sorted(project_ids):
            out.extend(self.vulnerabilities(project, as_of))
        return out

    def dependency_edges(self, as_of: datetime | None = None) -> list[DependencyEdge]:
        """Union of each project's latest edge set at or before as_of."""
        edges: list[DependencyEdge] = []
        with self._lock:
            for project in sorted(self._projects):
                state = self._projects[project]
                eligible = [
                    es for es in state.edge_sets if as_of is None or es.recorded_at <= as_of
                ]
                if eligible:
                    edges.extend(eligible[-1].edges)
        return edges

    def attestations(self, project: str) -> list[Attestation]:
        with self._lock:
            state = self._projects.get(project)
            if not state:
                return []
            return sorted(state.attestations, key=lambda a: (a.asserted_at, a.id))

    # -- catalogue ----------------------------------------------------------

    def list_projects(
        self,
        language: str | None = None,
        license: str | None = None,
        min_criticality: float | None = None,
        critical_only: bool = False,
        text: str | None = None,
        sort: str = "criticality_desc",
        offset: int = 0,
        limit: int = 50,
    ) -> tuple[int, list[tuple[ProjectRecord, HealthSnapshot | None]]]:
        """Filter, sort and paginate (record, latest snapshot) pairs.

        Filters are conjunctive; text matches name or description substrings
        case-insensitively. Returns (total matching count, page items).
        """
        if limit > MAX_PAGE_LIMIT:
            raise ValidationError(f"limit {limit} exceeds maximum {MAX_PAGE_LIMIT}")
        if limit < 0 or offset < 0:
            raise ValidationError("offset and limit must be non-negative")
        if sort not in ("criticality_desc", "name_asc"):
            raise ValidationError(f"unknown sort {sort!r}")
        rows: list[tuple[ProjectRecord, HealthSnapshot | None]] = []
        for project in self.projects():
            record = self.get_project_record(project)
            if record is None:
                continue
            snapshot = self.get_latest_snapshot(project)
            if language is not None and (record.primary_language or "").lower() != language.lower():
                continue
            if license is not None and (record.license or "").lower() != license.lower():
                continue
            if min_criticality is not None and (snapshot is None or snapshot.criticality < min_criticality):
                continue
            if critical_only and (snapshot is None or not snapshot.is_critical):
                continue
            if text is not None:
                needle = text.lower()
                haystacks = (record.ref.name, record.description or "")
                if not any(needle in h.lower() for h in haystacks):
                    continue
            rows.append((record, snapshot))
        if sort == "criticality_desc":
            rows.sort(
                key=lambda rs: (
                    -(rs[1].criticality if rs[1] else -1.0),
                    rs[0].ref.canonical_id,
                )
            )
        else:
            rows.sort(key=lambda rs: (rs[0].ref.name, rs[0].ref.canonical_id))
        total = len(rows)
        return total, rows[offset : offset + limit]

    def ecosystem_summary(self) -> dict[str, Any]:
        """Distribution summary computed from each project's latest snapshot."""
        histogram = [0] * 10
        category_values: dict[str, list[float]] = {"security": [], "activity": [], "relevance": []}
        project_count = 0
        critical_count = 0
        for project in self.projects():
            project_count += 1
            snapshot = self.get_latest_snapshot(project)
            if snapshot is None:
                continue
            histogram[min(9, int(snapshot.criticality * 10))] += 1
            if snapshot.is_critical:
                critical_count += 1
            for category, values in category_values.items():
                if category in snapshot.category_scores:
                    values.append(snapshot.category_scores[category])
        means = {
            category: (sum(values) / len(values) if values else None)
            for category, values in category_values.items()
        }
        return {
            "project_count": project_count,
            "critical_count": critical_count,
            "criticality_histogram": histogram,
            "category_means": means,
        }

    # -- export / import -----------------------------------------------------

    def export_records(self) -> Iterator[dict[str, Any]]:
        """Stream every stored record as schema-tagged dicts in canonical order."""
        with self._lock:
            project_ids = sorted(self._projects)
            for project in project_ids:
                state = self._projects[project]
                for record in sorted(state.records, key=lambda r: (r.fetched_at, _digest(r.to_dict()))):
                    yield {"kind": "project_record", "data": record.to_dict()}
                for obs in sorted(
                    state.observations, key=lambda o: (o.observed_at, o.metric_id, o.source)
                ):
                    yield {"kind": "observation", "data": obs.to_dict()}
                for snap in sorted(state.snapshots, key=lambda s: (s.computed_at, s.input_digest)):
                    yield {"kind": "snapshot", "data": snap.to_dict()}
                for vv in sorted(
                    state.vulns, key=lambda v: (v.recorded_at, v.record.vuln_id, v.content_key)
                ):
                    yield {
                        "kind": "vulnerability",
                        "project": project,
                        "recorded_at": format_ts(vv.recorded_at),
                        "data": vv.record.to_dict(),
                    }
                for es in sorted(state.edge_sets, key=lambda e: (e.recorded_at, e.content_key)):
                    yield {
                        "kind": "dependency_edges",
                        "project": project,
                        "recorded_at": format_ts(es.recorded_at),
                        "data": {"edges": [e.to_dict() for e in es.edges]},
                    }
                for att in sorted(state.attestations, key=lambda a: (a.asserted_at, a.id)):
                    yield {"kind": "attestation", "data": att.to_dict()}
            for envelope in self._watchlist_events:
                yield envelope

    def export_to(self, path: str | Path) -> int:
        """Write the export stream to a file; returns the record count."""
        count = 0
        try:
            with Path(path).open("w", encoding="utf-8") as fh:
                for envelope in self.export_records():
                    fh.write(_dump_line(envelope) + "\n")
                    count += 1
        except OSError as exc:
            raise StorageError(f"cannot write export to {path}: {exc}") from None
        return count

    def import_line(self, envelope: dict[str, Any]) -> bool:
        """Ingest one exported record; returns True when it was new."""
        with self._lock:
            return self._apply(envelope)

    def import_from(self, path: str | Path) -> dict[str, int]:
        inserted = 0
        deduplicated = 0
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read import file {path}: {exc}") from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                envelope = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON: {exc}") from None
            try:
                new = self.import_line(envelope)
            except (ValidationError, KeyError, TypeError) as exc:
                raise ValidationError(f"line {lineno}: invalid record: {exc}") from None
            if new:
                inserted += 1
            else:
                deduplicated += 1
        return {"inserted": inserted, "deduplicated": deduplicated}
