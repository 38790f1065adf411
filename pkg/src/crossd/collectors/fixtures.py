"""Fixture-bundle collector: typed records from an on-disk corpus.

Bundle layout: one subdirectory per project containing project.json
(ProjectRecord), stats.json (RepoStats), deps.json (DependencyEdge list),
vulns/ (OSV-style documents) and attestations.json (Attestation list).
deps.json, vulns/ and attestations.json are optional; a missing file means
"no data", never an error. Collection is deterministic: the same bundle
yields byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import NotFound, SchemaError, ValidationError
from ..model import Attestation, DependencyEdge, ProjectRecord, ProjectRef, VulnerabilityRecord
from ..validation import validate_payload
from .osv import ingest_osv_document
from .types import RepoStats

COLLECTOR_ID = "fixture"


@dataclass(frozen=True, slots=True)
class FixtureResult:
    record: ProjectRecord
    stats: RepoStats
    deps: tuple[DependencyEdge, ...]
    vulns: tuple[VulnerabilityRecord, ...]
    attestations: tuple[Attestation, ...]


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", file=str(path)) from None


def list_bundle_projects(bundle_path: str | Path) -> list[ProjectRef]:
    """All project refs present in a bundle, sorted by canonical id."""
    bundle = Path(bundle_path)
    if not bundle.is_dir():
        raise NotFound(f"fixture bundle {bundle} does not exist")
    refs = []
    for sub in sorted(p for p in bundle.iterdir() if p.is_dir()):
        project_file = sub / "project.json"
        if not project_file.is_file():
            continue
        payload = _read_json(project_file)
        validate_payload("project_record", payload, file=str(project_file))
        refs.append(ProjectRef.from_dict(payload["ref"]))
    return sorted(refs, key=lambda r: r.canonical_id)


def _project_dir(bundle: Path, project: ProjectRef) -> Path:
    for sub in sorted(p for p in bundle.iterdir() if p.is_dir()):
        project_file = sub / "project.json"
        if not project_file.is_file():
            continue
        try:
            payload = _read_json(project_file)
        except SchemaError:
            continue
        ref = payload.get("ref") or {}
        if ref.get("canonical_id") == project.canonical_id:
            return sub
    raise NotFound(f"project {project.canonical_id} not in bundle {bundle}")


def collect_fixture(bundle_path: str | Path, project: ProjectRef) -> FixtureResult:
    """Collect one project's fixture files into validated, typed records."""
    bundle = Path(bundle_path)
    if not bundle.is_dir():
        raise NotFound(f"fixture bundle {bundle} does not exist")
    sub = _project_dir(bundle, project)

    project_file = sub / "project.json"
    record_payload = _read_json(project_file)
    validate_payload("project_record", record_payload, file=str(project_file))
    record = ProjectRecord.from_dict(record_payload)

    stats_file = sub / "stats.json"
    if not stats_file.is_file():
        raise SchemaError("stats.json is required", file=str(stats_file))
    stats_payload = _read_json(stats_file)
    validate_payload("repo_stats", stats_payload, file=str(stats_file))
    if stats_payload["commits_90d"] > stats_payload["commits_total"]:
        raise SchemaError(
            f"commits_90d {stats_payload['commits_90d']} exceeds commits_total "
            f"{stats_payload['commits_total']}",
            file=str(stats_file),
            field="commits_90d",
        )
    try:
        stats = RepoStats.from_dict(stats_payload)
    except ValidationError as exc:
        raise SchemaError(str(exc), file=str(stats_file)) from None
    if stats.project != record.ref.canonical_id:
        raise SchemaError(
            f"stats are for {stats.project}, directory project is {record.ref.canonical_id}",
            file=str(stats_file),
            field="project",
        )

    deps: list[DependencyEdge] = []
    deps_file = sub / "deps.json"
    if deps_file.is_file():
        deps_payload = _read_json(deps_file)
        if not isinstance(deps_payload, list):
            raise SchemaError("deps.json must be a JSON array", file=str(deps_file))
        for i, entry in enumerate(deps_payload):
            validate_payload("dependency_edge", entry, file=str(deps_file))
            try:
                deps.append(DependencyEdge.from_dict(entry))
            except ValidationError as exc:
                raise SchemaError(str(exc), file=str(deps_file), field=str(i)) from None

    vulns: list[VulnerabilityRecord] = []
    vulns_dir = sub / "vulns"
    if vulns_dir.is_dir():
        for vuln_file in sorted(vulns_dir.glob("*.json")):
            vulns.append(ingest_osv_document(vuln_file.read_text(encoding="utf-8"), file=str(vuln_file)))

    attestations: list[Attestation] = []
    att_file = sub / "attestations.json"
    if att_file.is_file():
        att_payload = _read_json(att_file)
        if not isinstance(att_payload, list):
            raise SchemaError("attestations.json must be a JSON array", file=str(att_file))
        for entry in att_payload:
            validate_payload("attestation", entry, file=str(att_file))
            try:
                attestation = Attestation.from_dict(entry)
            except ValidationError as exc:
                raise SchemaError(str(exc), file=str(att_file)) from None
            if attestation.project != record.ref.canonical_id:
                raise SchemaError(
                    f"attestation {attestation.id} is for {attestation.project}",
                    file=str(att_file),
                    field="project",
                )
            attestations.append(attestation)

    return FixtureResult(
        record=record,
        stats=stats,
        deps=tuple(deps),
        vulns=tuple(vulns),
        attestations=tuple(attestations),
    )
