"""Bundled metric registry: loading and machine-readable export.

The registry document (crossd/data/metric_registry.json) is the catalogue of
every metric the platform computes or accepts, each with its normalization
spec and default score weight. The same document is served verbatim by the
API at /v1/metrics/definitions.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

from .model import MetricDefinition, MetricRegistry

REGISTRY_RESOURCE = "metric_registry.json"


def registry_document() -> dict[str, Any]:
    """The raw registry JSON document, freshly parsed."""
    text = resources.files("crossd.data").joinpath(REGISTRY_RESOURCE).read_text(encoding="utf-8")
    return json.loads(text)


def load_registry(document: dict[str, Any] | None = None) -> MetricRegistry:
    """Build a MetricRegistry from a registry document (default: the bundled one)."""
    doc = document if document is not None else registry_document()
    definitions = []
    weights = {}
    for entry in doc["metrics"]:
        fields = {k: v for k, v in entry.items() if k != "default_weight"}
        definitions.append(MetricDefinition.from_dict(fields))
        weights[entry["id"]] = float(entry.get("default_weight", 1.0))
    return MetricRegistry(definitions, default_weights=weights)


@lru_cache(maxsize=1)
def default_registry() -> MetricRegistry:
    """The bundled registry, loaded once per process."""
    return load_registry()
