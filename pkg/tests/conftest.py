from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import pytest

from crossd.config import load_config
from crossd.pipeline import ingest_bundle, score_stored
from crossd.registry import default_registry
from crossd.store import HealthStore
from crossd.timeutil import parse_ts

REPO_ROOT = Path(__file__).resolve().parents[1]
CORPUS_V1 = REPO_ROOT / "fixtures" / "corpus_v1"
CORPUS_V2 = REPO_ROOT / "fixtures" / "corpus_v2"
DEMO_CONFIG = REPO_ROOT / "fixtures" / "demo-config.yaml"
GOLDEN_FILE = Path(__file__).resolve().parent / "data" / "golden_snapshots_v1.json"

AS_OF_V1 = parse_ts("2024-03-01T00:00:00Z")
AS_OF_V2 = parse_ts("2024-03-02T00:00:00Z")

ALPHA = "github:demo/alpha"
BRAVO = "github:demo/bravo"
CHARLIE = "gitlab:demo/charlie"
DELTA = "github:demo/delta"
ECHO = "other-host:demo/echo"


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def golden():
    return json.loads(GOLDEN_FILE.read_text(encoding="utf-8"))


@pytest.fixture
def demo_cfg(tmp_path):
    """The committed demo config, with store and alert log moved into tmp."""
    cfg = load_config(DEMO_CONFIG)
    return dataclasses.replace(
        cfg,
        store_path=tmp_path / "store",
        alert_log=tmp_path / "alerts.ndjson",
    )


@pytest.fixture
def store(tmp_path):
    return HealthStore(tmp_path / "store")


@pytest.fixture
def scored_store(demo_cfg, registry):
    """Store with corpus v1 ingested and every project scored at the fixed instant."""
    store = HealthStore(demo_cfg.store_path)
    ingest_bundle(store, CORPUS_V1, registry, AS_OF_V1)
    for project in store.projects():
        score_stored(store, project, registry, demo_cfg.criticality, AS_OF_V1,
                     demo_cfg.category_weights)
    return store


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    verdicts: dict[str, str] = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, ()):
            if "test_acceptance.py" in report.nodeid and getattr(report, "when", "call") == "call":
                name = report.nodeid.split("::")[-1]
                verdicts[name] = label
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for name in sorted(verdicts):
            terminalreporter.write_line(f"{name}: {verdicts[name]}")
