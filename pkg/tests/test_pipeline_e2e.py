"""End-to-end: corpus v1 -> v2 transition drives exactly the expected alerts."""

from __future__ import annotations

import pytest

from crossd.monitor import (
    ACTIVITY_DROP,
    BECAME_CRITICAL,
    NEW_HIGH_VULN,
    AlertLog,
    Delivery,
    WatchlistSubscription,
)
from crossd.pipeline import MonitorService, ingest_bundle, score_stored
from crossd.store import HealthStore

from conftest import ALPHA, AS_OF_V1, AS_OF_V2, BRAVO, CHARLIE, CORPUS_V1, CORPUS_V2
from stubs import WebhookStub

RULES = (NEW_HIGH_VULN, BECAME_CRITICAL, ACTIVITY_DROP)


def _subscription(delivery, sub_id="sub-watch"):
    return WatchlistSubscription(
        id=sub_id,
        subscriber="ops-team",
        projects=frozenset({ALPHA, BRAVO, CHARLIE}),
        rules=frozenset(RULES),
        delivery=delivery,
    )


@pytest.fixture
def v1_store(demo_cfg, registry):
    store = HealthStore(demo_cfg.store_path)
    ingest_bundle(store, CORPUS_V1, registry, AS_OF_V1)
    for project in store.projects():
        score_stored(store, project, registry, demo_cfg.criticality, AS_OF_V1,
                     demo_cfg.category_weights)
    return store


def _service(store, registry, demo_cfg, **kw):
    return MonitorService(
        store,
        registry,
        demo_cfg.criticality,
        AlertLog(demo_cfg.alert_log),
        category_weights=demo_cfg.category_weights,
        activity_drop_fraction=demo_cfg.activity_drop_fraction,
        **kw,
    )


class TestTransitionAlerts:
    def test_exactly_one_alert_per_rule_and_zero_on_replay(self, v1_store, registry, demo_cfg):
        v1_store.put_watchlist(_subscription(Delivery(kind="log_sink")).to_dict())
        ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
        service = _service(v1_store, registry, demo_cfg)

        alerts = service.refresh_projects(v1_store.projects(), AS_OF_V2)
        fired = {(a.project, a.rule) for a in alerts}
        assert fired == {
            (ALPHA, NEW_HIGH_VULN),
            (BRAVO, BECAME_CRITICAL),
            (CHARLIE, ACTIVITY_DROP),
        }
        assert len(alerts) == 3
        assert all(a.delivery_state == "delivered" for a in alerts)
        new_vuln_alert = next(a for a in alerts if a.rule == NEW_HIGH_VULN)
        assert new_vuln_alert.payload["new_vuln_ids"] == ["OSV-2024-0142"]

        # replay within the same service: nothing new
        assert service.refresh_projects(v1_store.projects(), AS_OF_V2) == []

        # replay with a fresh service (dedup rebuilt from the alert log): nothing new
        fresh = _service(v1_store, registry, demo_cfg)
        assert fresh.refresh_projects(v1_store.projects(), AS_OF_V2) == []

    def test_transition_snapshots(self, v1_store, registry, demo_cfg):
        assert v1_store.get_latest_snapshot(BRAVO).is_critical is False
        ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
        service = _service(v1_store, registry, demo_cfg)
        service.refresh_projects(v1_store.projects(), AS_OF_V2)
        assert v1_store.get_latest_snapshot(BRAVO).is_critical is True
        assert v1_store.get_latest_snapshot(ALPHA).is_critical is True
        # charlie dropped activity but stays non-critical
        assert v1_store.get_latest_snapshot(CHARLIE).is_critical is False
        # alpha now has four transitive dependents (echo joined via bravo)
        obs = {o.metric_id: o.value.raw for o in v1_store.latest_observations(ALPHA, AS_OF_V2)}
        assert obs["transitive_dependents"] == 4.0

    def test_two_subscriptions_each_get_their_alerts(self, v1_store, registry, demo_cfg):
        v1_store.put_watchlist(_subscription(Delivery(kind="log_sink"), sub_id="sub-a").to_dict())
        v1_store.put_watchlist(
            WatchlistSubscription(
                id="sub-b",
                subscriber="security-team",
                projects=frozenset({ALPHA}),
                rules=frozenset({NEW_HIGH_VULN}),
                delivery=Delivery(kind="log_sink"),
            ).to_dict()
        )
        ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
        alerts = _service(v1_store, registry, demo_cfg).refresh_projects(
            v1_store.projects(), AS_OF_V2
        )
        per_sub = {(a.subscription_id, a.project, a.rule) for a in alerts}
        assert per_sub == {
            ("sub-a", ALPHA, NEW_HIGH_VULN),
            ("sub-a", BRAVO, BECAME_CRITICAL),
            ("sub-a", CHARLIE, ACTIVITY_DROP),
            ("sub-b", ALPHA, NEW_HIGH_VULN),
        }

    def test_webhook_delivery_and_retry_budget(self, v1_store, registry, demo_cfg):
        stub = WebhookStub(status=500).start()
        try:
            v1_store.put_watchlist(
                WatchlistSubscription(
                    id="sub-hook",
                    subscriber="ci-bot",
                    projects=frozenset({ALPHA}),
                    rules=frozenset({NEW_HIGH_VULN}),
                    delivery=Delivery(kind="webhook", url=stub.base_url + "/hook"),
                ).to_dict()
            )
            ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
            service = _service(
                v1_store, registry, demo_cfg,
                sleep_fn=lambda s: None, delivery_backoff_base=0.001,
            )
            alerts = service.refresh_projects(v1_store.projects(), AS_OF_V2)
            assert len(alerts) == 1
            assert alerts[0].delivery_state == "failed"
            assert len(stub.received) == 5  # full retry budget on persistent 500

            # delivery failure does not cause an alert storm on the next pass
            assert service.refresh_projects(v1_store.projects(), AS_OF_V2) == []
        finally:
            stub.stop()

    def test_webhook_success_path(self, v1_store, registry, demo_cfg):
        stub = WebhookStub(status=200).start()
        try:
            v1_store.put_watchlist(
                WatchlistSubscription(
                    id="sub-hook",
                    subscriber="ci-bot",
                    projects=frozenset({ALPHA}),
                    rules=frozenset({NEW_HIGH_VULN}),
                    delivery=Delivery(kind="webhook", url=stub.base_url + "/hook"),
                ).to_dict()
            )
            ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
            alerts = _service(v1_store, registry, demo_cfg).refresh_projects(
                v1_store.projects(), AS_OF_V2
            )
            assert [a.delivery_state for a in alerts] == ["delivered"]
            assert len(stub.received) == 1
        finally:
            stub.stop()


class TestConcurrentDelivery:
    def test_slow_webhook_does_not_stall_other_deliveries(self, v1_store, registry, demo_cfg):
        import time as _time

        slow = WebhookStub(status=200).start()
        try:
            original = slow.route

            def slow_route(record):
                _time.sleep(0.6)
                return original(record)

            slow.route = slow_route
            for i in range(3):
                v1_store.put_watchlist(
                    WatchlistSubscription(
                        id=f"sub-{i}", subscriber=f"s{i}",
                        projects=frozenset({ALPHA}),
                        rules=frozenset({NEW_HIGH_VULN}),
                        delivery=Delivery(kind="webhook", url=slow.base_url + f"/hook/{i}"),
                    ).to_dict()
                )
            ingest_bundle(v1_store, CORPUS_V2, registry, AS_OF_V2)
            service = _service(v1_store, registry, demo_cfg, sleep_fn=lambda s: None)
            started = _time.monotonic()
            alerts = service.refresh_projects(v1_store.projects(), AS_OF_V2)
            elapsed = _time.monotonic() - started
            assert len(alerts) == 3
            assert all(a.delivery_state == "delivered" for a in alerts)
            # three 0.6s webhooks in parallel finish well under 3x serial time
            assert elapsed < 1.5, f"deliveries ran serially ({elapsed:.2f}s)"
        finally:
            slow.stop()
