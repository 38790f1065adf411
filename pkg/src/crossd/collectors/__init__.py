"""Collectors: fixtures, live code hosts, vulnerability feeds, manifests."""

from .codehost import CodeHostClient, CodeHostResult, collect_code_host, host_rate_limiter
from .fixtures import FixtureResult, collect_fixture, list_bundle_projects
from .manifest import ingest_dependency_manifest
from .osv import ingest_osv_document
from .types import CollectorCursor, RepoStats

__all__ = [
    "CodeHostClient",
    "CodeHostResult",
    "CollectorCursor",
    "FixtureResult",
    "RepoStats",
    "collect_code_host",
    "collect_fixture",
    "host_rate_limiter",
    "ingest_dependency_manifest",
    "ingest_osv_document",
    "list_bundle_projects",
]
