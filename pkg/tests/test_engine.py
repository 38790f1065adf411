from __future__ import annotations

import math
import random

import pytest

from crossd.engine import (
    DEFAULT_CRITICALITY_PARAMS,
    DependencyReport,
    TimeToFixStats,
    apply_attestations,
    build_snapshot,
    category_score,
    compute_quantitative,
    criticality_score,
    dependency_analysis,
    is_critical,
    normalize_metric,
    observation_digest,
    score_project,
    time_to_fix,
)
from crossd.collectors.types import RepoStats
from crossd.errors import DomainError, ParamsError, ValidationError
from crossd.model import (
    Attestation,
    CriticalityParams,
    CriticalPolicy,
    DependencyEdge,
    MetricObservation,
    NormalizationSpec,
    ObservationValue,
    SignalParams,
    SignalVector,
    VulnerabilityRecord,
)
from crossd.timeutil import parse_ts

T0 = parse_ts("2024-03-01T00:00:00Z")


def _params(**signals):
    return CriticalityParams(
        signals={name: SignalParams(weight=w, threshold=t) for name, (w, t) in signals.items()},
        critical_policy=CriticalPolicy(score_threshold=0.8, dependents_threshold=5000),
    )


class TestCriticalityScore:
    def test_all_zero_signals(self):
        params = _params(a=(1.0, 10.0), b=(2.0, 100.0))
        assert criticality_score(SignalVector(values={"a": 0, "b": 0}), params) == 0.0

    def test_all_at_threshold_saturates_exactly(self):
        params = _params(a=(1.0, 10.0), b=(2.0, 100.0), c=(0.5, 7.0))
        signals = SignalVector(values={"a": 10, "b": 100, "c": 7})
        assert criticality_score(signals, params) == 1.0

    def test_single_signal_half(self):
        params = _params(s=(1.0, 99.0))
        score = criticality_score(SignalVector(values={"s": 9}), params)
        assert abs(score - 0.5) < 1e-12

    def test_weighted_two_signal_case(self):
        # Independently: ratios are log(10)/log(100)=0.5 and log(100)/log(100)=1,
        # so (1*0.5 + 3*1)/4 = 0.875.
        params = _params(x=(1.0, 99.0), y=(3.0, 99.0))
        score = criticality_score(SignalVector(values={"x": 9, "y": 99}), params)
        assert abs(score - 0.875) < 1e-12

    def test_missing_signal_counts_as_zero(self):
        params = _params(x=(1.0, 99.0), y=(1.0, 99.0))
        only_x = criticality_score(SignalVector(values={"x": 99}), params)
        assert abs(only_x - 0.5) < 1e-12

    def test_bounded_monotone_saturating_randomized(self):
        rng = random.Random(1337)
        names = ["s1", "s2", "s3", "s4"]
        for _ in range(300):
            params = _params(**{n: (rng.uniform(0.1, 5.0), rng.uniform(0.5, 1e6)) for n in names})
            values = {n: rng.uniform(0, 2e6) for n in names}
            score = criticality_score(SignalVector(values=values), params)
            assert 0.0 <= score <= 1.0
            # monotone: bumping one signal never decreases the score
            bump_name = rng.choice(names)
            bumped = dict(values)
            bumped[bump_name] = bumped[bump_name] * 1.5 + 1.0
            assert criticality_score(SignalVector(values=bumped), params) >= score - 1e-15
            # saturation: beyond the threshold the signal stops mattering
            saturated = dict(values)
            saturated[bump_name] = max(values[bump_name], params.signals[bump_name].threshold)
            s1 = criticality_score(SignalVector(values=saturated), params)
            saturated[bump_name] *= 7.0
            s2 = criticality_score(SignalVector(values=saturated), params)
            assert s1 == pytest.approx(s2, abs=1e-15)

    def test_log_base_invariance(self):
        rng = random.Random(7)
        for _ in range(200):
            w = [rng.uniform(0.1, 4) for _ in range(3)]
            t = [rng.uniform(1, 1e5) for _ in range(3)]
            s = [rng.uniform(0, 2e5) for _ in range(3)]
            natural = sum(
                wi * math.log1p(si) / math.log1p(max(si, ti)) for wi, si, ti in zip(w, s, t)
            ) / sum(w)
            base10 = sum(
                wi * math.log10(1 + si) / math.log10(1 + max(si, ti))
                for wi, si, ti in zip(w, s, t)
            ) / sum(w)
            assert abs(natural - base10) < 1e-12


class TestNormalizeMetric:
    def test_zero(self):
        assert normalize_metric(0, NormalizationSpec("saturating_log", 99)) == 0.0

    def test_cap_reaches_one(self):
        assert normalize_metric(99, NormalizationSpec("saturating_log", 99)) == 1.0

    def test_half_log(self):
        n = normalize_metric(9, NormalizationSpec("saturating_log", 99))
        assert abs(n - 0.5) < 1e-12

    def test_linear_clamp(self):
        spec = NormalizationSpec("linear_clamp", 10)
        assert normalize_metric(5, spec) == 0.5
        assert normalize_metric(25, spec) == 1.0

    def test_identity_domain(self):
        spec = NormalizationSpec("identity", 1)
        assert normalize_metric(0.25, spec) == 0.25
        with pytest.raises(DomainError):
            normalize_metric(1.5, spec)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            normalize_metric(-1, NormalizationSpec("saturating_log", 10))


def _edges(*pairs, kind="runtime"):
    return [DependencyEdge(from_node=a, to_node=b, kind=kind) for a, b in pairs]


def exhaustive_reachability(pairs: set[tuple[str, str]], start: str, forward: bool) -> set[str]:
    """Oracle: iterate closure over the raw pair set until a fixpoint."""
    reached: set[str] = set()
    changed = True
    while changed:
        changed = False
        for a, b in pairs:
            tail, head = (a, b) if forward else (b, a)
            if (tail == start or tail in reached) and head != start and head not in reached:
                reached.add(head)
                changed = True
    return reached


class TestDependencyAnalysis:
    def test_chain(self):
        edges = _edges(("a", "b"), ("b", "c"))
        report_a = dependency_analysis(edges, "a")
        assert (report_a.direct_deps, report_a.transitive_deps) == (1, 2)
        report_c = dependency_analysis(edges, "c")
        assert report_c.transitive_dependents == 2

    def test_diamond_counts_once(self):
        edges = _edges(("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"))
        report = dependency_analysis(edges, "a")
        assert report.direct_deps == 2
        assert report.transitive_deps == 3

    def test_empty_graph(self):
        report = dependency_analysis([], "a")
        assert report == DependencyReport.empty("a")

    def test_cycle_safe(self):
        edges = _edges(("a", "b"), ("b", "c"), ("c", "a"))
        report = dependency_analysis(edges, "a")
        assert report.transitive_deps == 2
        assert report.transitive_dependents == 2

    def test_runtime_only_filters_dev(self):
        edges = _edges(("a", "b")) + _edges(("a", "d"), kind="dev")
        assert dependency_analysis(edges, "a", runtime_only=True).direct_deps == 1
        assert dependency_analysis(edges, "a", runtime_only=False).direct_deps == 2

    def test_canonical_ids_and_package_names_meet(self):
        edges = _edges(("github:demo/bravo", "alpha"), ("gitlab:demo/charlie", "alpha"))
        report = dependency_analysis(edges, "github:demo/alpha")
        assert report.direct_dependents == 2

    def test_vulnerable_deps_matching(self):
        edges = _edges(("a", "b"), ("b", "c"))
        vuln = VulnerabilityRecord(
            vuln_id="V-1", package="c", affected_range="*", severity="high",
            severity_score=7.5, published_at=T0,
        )
        assert dependency_analysis(edges, "a", vulns=[vuln]).vulnerable_deps == 1
        assert dependency_analysis(edges, "c", vulns=[vuln]).vulnerable_deps == 0

    def test_random_graphs_match_exhaustive_enumeration(self):
        rng = random.Random(2024)
        for round_no in range(250):
            n = rng.randint(2, 50)
            nodes = [f"n{i}" for i in range(n)]
            pairs = set()
            for _ in range(rng.randint(0, 3 * n)):
                a, b = rng.sample(nodes, 2)
                pairs.add((a, b))
            edges = _edges(*pairs)
            start = rng.choice(nodes)
            report = dependency_analysis(edges, start)
            fwd = exhaustive_reachability(pairs, start, forward=True)
            back = exhaustive_reachability(pairs, start, forward=False)
            assert report.transitive_deps == len(fwd), f"round {round_no}"
            assert report.transitive_dependents == len(back), f"round {round_no}"
            assert report.direct_deps == len({b for a, b in pairs if a == start})
            assert report.direct_dependents == len({a for a, b in pairs if b == start})


def _vuln(vuln_id, published, fixed=None, severity="medium", score=5.5, package="p"):
    return VulnerabilityRecord(
        vuln_id=vuln_id,
        package=package,
        affected_range="*",
        severity=severity,
        severity_score=score,
        published_at=parse_ts(published),
        fixed_at=parse_ts(fixed) if fixed else None,
        fixed_version="1.0.1" if fixed else None,
    )


class TestTimeToFix:
    def test_single_fixed(self):
        stats = time_to_fix([_vuln("V1", "2023-01-01T00:00:00Z", "2023-01-11T00:00:00Z")],
                            parse_ts("2023-02-01T00:00:00Z"))
        assert stats.fixed_count == 1
        assert stats.median_days_to_fix == 10.0
        assert stats.open_count == 0

    def test_empty(self):
        stats = time_to_fix([], T0)
        assert stats == TimeToFixStats(0, 0, None, None)

    def test_censored_open(self):
        stats = time_to_fix([_vuln("V1", "2023-01-01T00:00:00Z")], parse_ts("2023-01-31T00:00:00Z"))
        assert stats.open_count == 1
        assert stats.max_open_age_days == 30.0
        assert stats.median_days_to_fix is None

    def test_even_count_median_is_mean_of_middle(self):
        vulns = [
            _vuln("V1", "2023-01-01T00:00:00Z", "2023-01-05T00:00:00Z"),
            _vuln("V2", "2023-01-01T00:00:00Z", "2023-01-11T00:00:00Z"),
        ]
        stats = time_to_fix(vulns, parse_ts("2023-02-01T00:00:00Z"))
        assert stats.median_days_to_fix == 7.0

    def test_fix_after_as_of_counts_as_open(self):
        stats = time_to_fix(
            [_vuln("V1", "2023-01-01T00:00:00Z", "2023-03-01T00:00:00Z")],
            parse_ts("2023-01-31T00:00:00Z"),
        )
        assert stats.fixed_count == 0
        assert stats.open_count == 1

    def test_fraction_of_day_is_exact_seconds(self):
        stats = time_to_fix(
            [_vuln("V1", "2023-01-01T00:00:00Z", "2023-01-01T12:00:00Z")],
            parse_ts("2023-02-01T00:00:00Z"),
        )
        assert stats.median_days_to_fix == 0.5


def _obs(metric_id, value, project="github:demo/alpha", at="2024-03-01T00:00:00Z", source="t"):
    v = ObservationValue.ordinal(value) if isinstance(value, int) and metric_id in (
        "funding", "security_policy", "industry_adoption") else ObservationValue.number(float(value))
    return MetricObservation(
        metric_id=metric_id, project=project, value=v, observed_at=parse_ts(at), source=source
    )


class TestComputeQuantitative:
    def _stats(self, **overrides):
        base = dict(
            project="github:demo/alpha",
            contributors=2,
            commits_total=3,
            commits_90d=1,
            forks=0,
            stars=5,
            open_pull_requests=0,
            pull_requests_90d=0,
            fetched_at=T0,
        )
        base.update(overrides)
        return RepoStats(**base)

    def test_field_pass_through(self):
        observations = compute_quantitative(self._stats(), DependencyReport.empty("github:demo/alpha"), [], T0)
        by_id = {o.metric_id: o.value.raw for o in observations}
        assert by_id["contributors"] == 2.0
        assert by_id["commits_total"] == 3.0

    def test_absent_optional_fields_are_omitted(self):
        observations = compute_quantitative(self._stats(), DependencyReport.empty("github:demo/alpha"), [], T0)
        ids = {o.metric_id for o in observations}
        assert "lines_of_code" not in ids
        assert "downloads_90d" not in ids
        assert "median_days_to_fix" not in ids  # no fixed vulns

    def test_high_severity_count(self):
        vulns = [_vuln("V1", "2023-01-01T00:00:00Z", severity="high", score=8.0)]
        observations = compute_quantitative(
            self._stats(), DependencyReport.empty("github:demo/alpha"), vulns, T0
        )
        by_id = {o.metric_id: o.value.raw for o in observations}
        assert by_id["high_or_critical_vulns"] == 1.0
        assert by_id["open_vulns"] == 1.0

    def test_all_observations_timestamped_as_of(self):
        observations = compute_quantitative(self._stats(), DependencyReport.empty("github:demo/alpha"), [], T0)
        assert all(o.observed_at == T0 for o in observations)


class TestCategoryScore:
    def test_single_metric_mean(self, registry):
        # commits_90d normalized log(1+9)/log(1+999); pick value for norm 0.5 via cap:
        score = category_score([_obs("security_policy", 2)], registry, {"security_policy": 1.0}, "security")
        assert score == 0.5  # ordinal 2 / cap 4

    def test_lower_is_better_reversal(self, registry):
        # median_days_to_fix normalizes linearly against 365; 73 days -> 0.2 -> 0.8
        score = category_score(
            [_obs("median_days_to_fix", 73.0)], registry, {"median_days_to_fix": 1.0}, "security"
        )
        assert abs(score - 0.8) < 1e-12

    def test_weighted_mean(self, registry):
        # downloads at cap -> 1.0; transitive_dependents 0 -> 0.0; weights 3:1 -> 0.75
        observations = [_obs("downloads_90d", 1_000_000), _obs("transitive_dependents", 0)]
        score = category_score(
            observations, registry, {"downloads_90d": 3.0, "transitive_dependents": 1.0}, "relevance"
        )
        assert abs(score - 0.75) < 1e-12

    def test_absent_when_no_focus_metric_observed(self, registry):
        assert category_score([_obs("stars", 10)], registry, {"open_vulns": 1.0}, "security") is None

    def test_wrong_focus_weight_rejected(self, registry):
        with pytest.raises(ParamsError):
            category_score([], registry, {"stars": 1.0}, "security")

    def test_unknown_metric_weight_rejected(self, registry):
        with pytest.raises(ParamsError):
            category_score([], registry, {"bogus": 1.0}, "security")

    def test_neutral_metrics_excluded(self, registry):
        assert category_score([_obs("commits_total", 100)], registry, {}, "general") is None

    def test_extremes(self, registry):
        ones = [_obs("downloads_90d", 10_000_000), _obs("stars", 100_000)]
        assert category_score(ones, registry, {"downloads_90d": 1.0, "stars": 1.0}, "relevance") == 1.0
        zeros = [_obs("downloads_90d", 0), _obs("stars", 0)]
        assert category_score(zeros, registry, {"downloads_90d": 1.0, "stars": 1.0}, "relevance") == 0.0


class TestIsCritical:
    POLICY = CriticalPolicy(score_threshold=0.8, dependents_threshold=5000)

    def _report(self, dependents):
        return DependencyReport("github:demo/alpha", 0, 0, 0, dependents, 0)

    def test_score_disjunct(self):
        assert is_critical(0.9, self._report(10), self.POLICY) is True

    def test_dependents_disjunct(self):
        assert is_critical(0.3, self._report(10000), self.POLICY) is True

    def test_neither(self):
        assert is_critical(0.5, self._report(10), self.POLICY) is False

    def test_boundary_inclusive(self):
        assert is_critical(0.8, self._report(0), self.POLICY) is True
        assert is_critical(0.0, self._report(5000), self.POLICY) is True


def _attestation(att_id, metric, value, asserted, expires=None):
    return Attestation(
        id=att_id,
        project="github:demo/alpha",
        metric_id=metric,
        assessor="assessor",
        value=value,
        asserted_at=parse_ts(asserted),
        expires_at=parse_ts(expires) if expires else None,
    )


class TestApplyAttestations:
    def test_gated_off_when_not_critical(self, registry):
        atts = [_attestation("a1", "funding", 3, "2023-01-01T00:00:00Z")]
        assert apply_attestations(atts, registry, critical=False, as_of=T0) == []

    def test_newest_wins(self, registry):
        atts = [
            _attestation("a1", "funding", 1, "2023-01-01T00:00:00Z"),
            _attestation("a2", "funding", 4, "2023-06-01T00:00:00Z"),
        ]
        out = apply_attestations(atts, registry, critical=True, as_of=T0)
        assert len(out) == 1
        assert out[0].value.raw == 4
        assert out[0].source == "a2"
        assert out[0].observed_at == parse_ts("2023-06-01T00:00:00Z")

    def test_expired_ignored(self, registry):
        atts = [_attestation("a1", "funding", 3, "2022-01-01T00:00:00Z", expires="2023-01-01T00:00:00Z")]
        assert apply_attestations(atts, registry, critical=True, as_of=T0) == []

    def test_future_assertions_ignored(self, registry):
        atts = [_attestation("a1", "funding", 3, "2025-01-01T00:00:00Z")]
        assert apply_attestations(atts, registry, critical=True, as_of=T0) == []


class TestBuildSnapshot:
    def test_zero_observations_empty_graph(self, registry):
        snap = build_snapshot(
            "github:demo/alpha", [], DependencyReport.empty("github:demo/alpha"),
            DEFAULT_CRITICALITY_PARAMS, T0, registry,
        )
        assert snap.criticality == 0.0
        assert snap.category_scores == {}
        assert snap.is_critical is False

    def test_determinism_including_digest(self, registry):
        observations = [_obs("commits_90d", 50), _obs("stars", 100)]
        report = DependencyReport("github:demo/alpha", 1, 2, 0, 0, 0)
        a = build_snapshot("github:demo/alpha", observations, report, DEFAULT_CRITICALITY_PARAMS, T0, registry)
        b = build_snapshot("github:demo/alpha", observations, report, DEFAULT_CRITICALITY_PARAMS, T0, registry)
        assert a == b
        assert a.input_digest == b.input_digest

    def test_digest_sensitive_to_values(self):
        d1 = observation_digest([_obs("stars", 1)])
        d2 = observation_digest([_obs("stars", 2)])
        assert d1 != d2

    def test_mixed_project_rejected(self, registry):
        with pytest.raises(ValidationError):
            build_snapshot(
                "github:demo/alpha",
                [_obs("stars", 1, project="github:demo/bravo")],
                DependencyReport.empty("github:demo/alpha"),
                DEFAULT_CRITICALITY_PARAMS,
                T0,
                registry,
            )

    def test_score_project_gates_qualitative(self, registry):
        # high enough signals to be critical via dependents policy
        report = DependencyReport("github:demo/alpha", 0, 0, 0, 6000, 0)
        atts = [_attestation("a1", "funding", 4, "2023-01-01T00:00:00Z")]
        snapshot, qualitative = score_project(
            "github:demo/alpha", [_obs("commits_90d", 10)], atts, report,
            DEFAULT_CRITICALITY_PARAMS, T0, registry,
        )
        assert snapshot.is_critical is True
        assert [q.metric_id for q in qualitative] == ["funding"]
        # same inputs but a non-critical graph: attestations stay dormant
        snapshot2, qualitative2 = score_project(
            "github:demo/alpha", [_obs("commits_90d", 10)], atts,
            DependencyReport.empty("github:demo/alpha"), DEFAULT_CRITICALITY_PARAMS, T0, registry,
        )
        assert snapshot2.is_critical is False
        assert qualitative2 == []
