"""
Acceptance Suite Tests

The full suite takes minutes; here every criterion runs on the reduced
settings from conftest and is checked for structure and for the
criteria whose outcome does not depend on the environment size.
"""

import pytest

from acceptance import (
    criterion_clt,
    criterion_collisions,
    criterion_cutoff,
    criterion_equilibrium,
    criterion_limits,
    criterion_martingale,
    criterion_path_oracle,
    criterion_convergence_bound,
    criterion_window,
    mixture_runs,
    info_proxy,
    parallel_map,
    run_acceptance,
)
from schemas import AcceptanceSettings, VerifyReport


@pytest.fixture(scope="module")
def runs():
    """Two mixture environments at n = 3000, shared by the statistical tests"""
    settings = AcceptanceSettings(seed=99, mixture_n=3000, mixture_seeds=2, required_seeds=2)
    return settings, mixture_runs(settings)


class TestHelpers:
    """Test parallel_map"""

    def test_ordered(self):
        """Test that results keep task order in both modes"""
        tasks = [-3, 1, -2, 5]
        assert parallel_map(abs, tasks, 1) == [3, 1, 2, 5]
        assert parallel_map(abs, tasks, 2) == [3, 1, 2, 5]


class TestExactCriteria:
    """Test the oracle-backed criteria"""

    def test_path_oracle(self, tiny_settings):
        """Test agreement with path enumeration"""
        result = criterion_path_oracle(tiny_settings)
        assert result.passed
        assert result.measured <= 1e-12

    def test_equilibrium(self, tiny_settings):
        """Test agreement with the dense solve and the balanced case"""
        result = criterion_equilibrium(tiny_settings)
        assert result.passed
        assert set(result.measured) == {"dense", "balanced"}

    def test_collisions(self, tiny_settings):
        """Test the mean collision count against its bound"""
        result = criterion_collisions(tiny_settings)
        assert result.passed
        assert set(result.measured) == {"mixture_k50", "regular_k10"}

    def test_clt(self, tiny_settings):
        """Test the annealed CLT at c in {-1, 0, 1}"""
        result = criterion_clt(tiny_settings)
        assert result.passed
        assert result.measured["0.0"]["atom"] > 0.0
        assert result.measured["1.0"]["atom"] == 0.0


class TestStatisticalCriteria:
    """Test the criteria built on sampled environments and trees"""

    def test_mixture_runs(self, runs):
        """Test the per-environment measurements"""
        settings, results = runs
        assert [r["index"] for r in results] == [0, 1]
        for r in results:
            assert r["tv_early"] >= 0.9
            assert r["tv_late"] <= 0.1
            assert r["profile"].is_monotone(slack=1e-9)

    def test_convergence_bound(self, runs):
        """Test the exponential bound with slack"""
        settings, results = runs
        assert criterion_convergence_bound(settings, results).passed

    def test_cutoff_and_window_structure(self, runs):
        """Test the fields reported by the cutoff and window criteria"""
        settings, results = runs
        cutoff = criterion_cutoff(settings, results)
        assert len(cutoff.measured["t_half"]) == 2
        window = criterion_window(settings, results)
        assert 0.0 <= window.measured <= 1.0
        proxy = info_proxy(settings, results)
        assert not proxy.primary

    def test_parallel_runs_match(self, runs):
        """Test that worker processes reproduce the serial runs"""
        settings, results = runs
        parallel = mixture_runs(settings, jobs=2)
        for a, b in zip(results, parallel):
            assert a["bound_excess"] == b["bound_excess"]
            assert a["tv_late"] == b["tv_late"]
            assert a["t_half"] == b["t_half"]

    def test_martingale(self, tiny_settings):
        """Test the martingale checks at reduced size"""
        result = criterion_martingale(tiny_settings)
        assert result.passed
        assert result.measured["worst_increment_se"] <= tiny_settings.se_band

    def test_limits_structure(self, tiny_settings):
        """Test the population dynamics and W1 report"""
        result = criterion_limits(tiny_settings)
        assert len(result.measured["w1_trace"]) == tiny_settings.rde_iterations
        assert result.measured["w1_trace"][0] == pytest.approx(0.2, abs=0.05)
        assert result.threshold["w1_step"] == tiny_settings.rde_w1_tol
        assert result.measured["worst_mean_se"] <= tiny_settings.se_band
        assert len(result.measured["w1_mean"]) == 2
        assert all(w >= 0.0 for w in result.measured["w1_mean"])


class TestRunAcceptance:
    """Test run_acceptance end to end at reduced size"""

    def test_report(self, tiny_settings):
        """Test report layout, determinism and the pass rule"""
        report = run_acceptance(tiny_settings)
        names = [c.name for c in report.criteria]
        assert names[:2] == ["path_oracle", "equilibrium"]
        assert "determinism" in names
        determinism = next(c for c in report.criteria if c.name == "determinism")
        assert determinism.passed
        replayed = [c.name for c in report.criteria if c.name != "determinism"]
        assert sorted(determinism.measured) == sorted(replayed)
        assert len([c for c in report.criteria if c.primary]) == 10
        assert report.passed == all(c.passed for c in report.criteria if c.primary)
        assert VerifyReport.model_validate_json(report.model_dump_json()).seed == tiny_settings.seed
