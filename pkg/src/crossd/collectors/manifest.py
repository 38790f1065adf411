"""Dependency-manifest ingestion: declared deps into typed graph edges."""

from __future__ import annotations

import json

from ..errors import SchemaError
from ..model import DependencyEdge, node_name

_RUNTIME_SECTIONS = ("dependencies", "runtime_dependencies")
_DEV_SECTIONS = ("dev_dependencies", "devDependencies")


def _edges_from_section(doc: dict, sections: tuple[str, ...], owner: str, kind: str, file: str | None):
    edges = []
    for section in sections:
        block = doc.get(section)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise SchemaError(f"{section} must be a map of name -> constraint", file=file, field=section)
        for name, constraint in sorted(block.items()):
            if not isinstance(name, str) or not name:
                raise SchemaError("dependency name must be a non-empty string", file=file, field=section)
            if not isinstance(constraint, str):
                raise SchemaError(f"constraint for {name!r} must be a string", file=file, field=f"{section}.{name}")
            if node_name(name) == node_name(owner):
                continue  # self-dependency, dropped
            edges.append(DependencyEdge(from_node=owner, to_node=name, kind=kind, constraint=constraint))
    return edges


def ingest_dependency_manifest(doc: str, owner: str, file: str | None = None) -> list[DependencyEdge]:
    """One edge per declared dependency; dev/runtime kind from the section.

    Constraints are carried opaquely; self-dependencies are dropped after
    node canonicalization.
    """
    try:
        payload = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", file=file) from None
    if not isinstance(payload, dict):
        raise SchemaError("manifest must be a JSON object", file=file)
    edges = _edges_from_section(payload, _RUNTIME_SECTIONS, owner, "runtime", file)
    edges += _edges_from_section(payload, _DEV_SECTIONS, owner, "dev", file)
    return edges
