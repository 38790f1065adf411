"""Platform configuration: one structured YAML file, validated at startup.

Relative paths in the file are resolved against the working directory, which
lets a committed config ship alongside a fixture corpus. Every value has a
default; an empty or missing file yields a fully working local setup.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Any, Mapping

import yaml

from .engine import DEFAULT_CRITICALITY_PARAMS
from .errors import ValidationError
from .model import CriticalityParams

CONFIG_ENV_VAR = "CROSSD_CONFIG"
TOKEN_ENV_VAR = "CROSSD_TOKEN"

DEFAULT_NORMAL_CADENCE_HOURS = 24.0
DEFAULT_CRITICAL_CADENCE_HOURS = 6.0


@dataclass(frozen=True, slots=True)
class HostConfig:
    """Base URL and auth token for one code-hosting platform."""

    base_url: str
    token: str = ""

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "HostConfig":
        base_url = d.get("base_url")
        if not base_url or not isinstance(base_url, str):
            raise ValidationError("host config requires a base_url string")
        token = d.get("token") or ""
        token_env = d.get("token_env", TOKEN_ENV_VAR)
        if not token and token_env:
            token = os.environ.get(token_env, "")
        return cls(base_url=base_url, token=token)


@dataclass(frozen=True, slots=True)
class PlatformConfig:
    store_path: Path = Path("./crossd-store")
    fixture_paths: tuple[Path, ...] = ()
    hosts: Mapping[str, HostConfig] = field(default_factory=dict)
    criticality: CriticalityParams = DEFAULT_CRITICALITY_PARAMS
    category_weights: Mapping[str, Mapping[str, float]] | None = None
    normal_cadence: timedelta = timedelta(hours=DEFAULT_NORMAL_CADENCE_HOURS)
    critical_cadence: timedelta = timedelta(hours=DEFAULT_CRITICAL_CADENCE_HOURS)
    activity_drop_fraction: float = 0.5
    alert_log: Path = Path("./crossd-alerts.ndjson")
    api_host: str = "127.0.0.1"
    api_port: int = 8080
    write_token: str = ""
    static_dir: Path | None = None

    def __post_init__(self):
        if self.critical_cadence > self.normal_cadence:
            raise ValidationError("critical cadence must be <= normal cadence")
        if not 0 < self.activity_drop_fraction < 1:
            raise ValidationError("activity_drop_fraction must be in (0,1)")


def _expect_map(value: Any, label: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ValidationError(f"config section {label!r} must be a mapping")
    return value


def load_config(path: str | Path | None = None) -> PlatformConfig:
    """Load and validate the platform config; invalid config is a fatal error.

    Resolution order: explicit path, then $CROSSD_CONFIG, then built-in
    defaults (no file needed).
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    raw: dict[str, Any] = {}
    if path is not None:
        config_file = Path(path)
        if not config_file.is_file():
            raise ValidationError(f"config file {config_file} does not exist")
        try:
            raw = yaml.safe_load(config_file.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ValidationError(f"config file {config_file} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ValidationError(f"config file {config_file} must contain a mapping")

    hosts = {
        name: HostConfig.from_dict(_expect_map(entry, f"hosts.{name}"))
        for name, entry in _expect_map(raw.get("hosts"), "hosts").items()
    }

    crit_raw = _expect_map(raw.get("criticality"), "criticality")
    if crit_raw:
        try:
            criticality = CriticalityParams.from_dict(
                {
                    "signals": _expect_map(crit_raw.get("signals"), "criticality.signals"),
                    "critical_policy": _expect_map(
                        crit_raw.get("critical_policy"), "criticality.critical_policy"
                    ),
                }
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"criticality config is incomplete: {exc}") from None
    else:
        criticality = DEFAULT_CRITICALITY_PARAMS

    weights_raw = raw.get("category_weights")
    category_weights = None
    if weights_raw:
        category_weights = {}
        for focus, metric_weights in _expect_map(weights_raw, "category_weights").items():
            category_weights[focus] = {
                m: float(w) for m, w in _expect_map(metric_weights, f"category_weights.{focus}").items()
            }

    monitor_raw = _expect_map(raw.get("monitor"), "monitor")
    api_raw = _expect_map(raw.get("api"), "api")

    fixture_paths = raw.get("fixture_paths") or []
    if not isinstance(fixture_paths, list):
        raise ValidationError("fixture_paths must be a list of directories")

    try:
        return PlatformConfig(
            store_path=Path(raw.get("store_path") or "./crossd-store"),
            fixture_paths=tuple(Path(p) for p in fixture_paths),
            hosts=hosts,
            criticality=criticality,
            category_weights=category_weights,
            normal_cadence=timedelta(
                hours=float(monitor_raw.get("normal_cadence_hours", DEFAULT_NORMAL_CADENCE_HOURS))
            ),
            critical_cadence=timedelta(
                hours=float(monitor_raw.get("critical_cadence_hours", DEFAULT_CRITICAL_CADENCE_HOURS))
            ),
            activity_drop_fraction=float(monitor_raw.get("activity_drop_fraction", 0.5)),
            alert_log=Path(monitor_raw.get("alert_log") or "./crossd-alerts.ndjson"),
            api_host=str(api_raw.get("host", "127.0.0.1")),
            api_port=int(api_raw.get("port", 8080)),
            write_token=str(api_raw.get("write_token", "")),
            static_dir=Path(api_raw["static_dir"]) if api_raw.get("static_dir") else None,
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid config value: {exc}") from None
