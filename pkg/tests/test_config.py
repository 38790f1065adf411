from __future__ import annotations

from datetime import timedelta

import pytest

from crossd.config import load_config
from crossd.engine import DEFAULT_CRITICALITY_PARAMS
from crossd.errors import ValidationError

from conftest import DEMO_CONFIG, REPO_ROOT


class TestLoadConfig:
    def test_defaults_without_file(self, monkeypatch):
        monkeypatch.delenv("CROSSD_CONFIG", raising=False)
        cfg = load_config(None)
        assert cfg.criticality == DEFAULT_CRITICALITY_PARAMS
        assert cfg.normal_cadence == timedelta(hours=24)
        assert cfg.critical_cadence == timedelta(hours=6)

    def test_demo_config_parses(self):
        cfg = load_config(DEMO_CONFIG)
        assert cfg.criticality.signals["transitive_dependents"].threshold == 4
        assert cfg.criticality.critical_policy.dependents_threshold == 4
        assert cfg.write_token == "demo-write-token"
        assert str(cfg.store_path) == "store"

    def test_example_config_parses_to_defaults(self):
        cfg = load_config(REPO_ROOT / "crossd.example.yaml")
        assert cfg.criticality == DEFAULT_CRITICALITY_PARAMS
        assert cfg.hosts["github"].base_url == "https://api.github.com"

    def test_env_var_fallback(self, tmp_path, monkeypatch):
        path = tmp_path / "c.yaml"
        path.write_text("store_path: /tmp/elsewhere\n")
        monkeypatch.setenv("CROSSD_CONFIG", str(path))
        assert str(load_config(None).store_path) == "/tmp/elsewhere"

    def test_missing_file_is_fatal(self):
        with pytest.raises(ValidationError):
            load_config("/definitely/not/here.yaml")

    def test_invalid_yaml_is_fatal(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("store_path: [unclosed\n")
        with pytest.raises(ValidationError):
            load_config(path)

    def test_incomplete_criticality_is_fatal(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("criticality:\n  signals:\n    x: {weight: 1.0}\n")
        with pytest.raises(ValidationError):
            load_config(path)

    def test_cadence_invariant_enforced(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("monitor:\n  normal_cadence_hours: 1\n  critical_cadence_hours: 10\n")
        with pytest.raises(ValidationError):
            load_config(path)

    def test_token_from_environment(self, tmp_path, monkeypatch):
        path = tmp_path / "c.yaml"
        path.write_text("hosts:\n  github:\n    base_url: https://api.github.com\n")
        monkeypatch.setenv("CROSSD_TOKEN", "sekrit")
        assert load_config(path).hosts["github"].token == "sekrit"
