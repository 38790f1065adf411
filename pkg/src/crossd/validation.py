"""JSON Schema loading and validation for fixtures, store payloads and the API."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema

from .errors import SchemaError


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict[str, Any]:
    """Load a bundled schema by name, e.g. "repo_stats" or "api/project_detail"."""
    package = "crossd.schemas"
    filename = name
    if "/" in name:
        sub, filename = name.split("/", 1)
        package = f"crossd.schemas.{sub}"
    text = resources.files(package).joinpath(f"{filename}.json").read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator(name: str) -> jsonschema.Draft202012Validator:
    schema = load_schema(name)
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


def validate_payload(name: str, payload: Any, file: str | None = None) -> None:
    """Validate payload against the named schema; SchemaError carries file and field."""
    errors = sorted(_validator(name).iter_errors(payload), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    best = errors[0]
    field = ".".join(str(p) for p in best.absolute_path) or None
    raise SchemaError(best.message, file=file, field=field)


def is_valid(name: str, payload: Any) -> bool:
    return _validator(name).is_valid(payload)
