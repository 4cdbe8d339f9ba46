"""
Tests for services/percolation_service.py - G(n,p) sampling and critical-window estimators
"""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from errors import DomainError, PreconditionError, SimulationBudgetError
from models import ComponentStats
from services.oracle_service import (
    D1_ZERO,
    D2_ZERO,
    DLOG_ZERO,
    F_ZERO,
    OracleService,
    poly_derivative,
    poly_eval,
    susceptibility_poly,
)
from services.percolation_service import (
    ESTIMANDS,
    PercolationService,
    critical_p,
    decode_pairs,
    functionals,
    large_component_threshold,
    power_sums,
)


@pytest.fixture
def service():
    return PercolationService(threads=1, max_edges=10_000_000)


class TestParameters:
    def test_critical_p(self):
        assert critical_p(1000, 0.0) == pytest.approx(1e-3)
        assert critical_p(1000, 1.0) == pytest.approx(1e-3 + 1e-4)

    def test_critical_p_domain(self):
        with pytest.raises(DomainError):
            critical_p(0, 0.0)
        with pytest.raises(DomainError):
            critical_p(2, -100.0)

    def test_large_component_threshold_exact(self):
        assert large_component_threshold(1) == 1
        assert large_component_threshold(2) == 2
        assert large_component_threshold(1000) == 100
        assert large_component_threshold(10**6) == 10**4
        assert large_component_threshold(1001) == 101


class TestSampling:
    def test_decode_pairs_lexicographic(self):
        rows, cols = decode_pairs(4, np.arange(6))
        assert rows.tolist() == [0, 0, 0, 1, 1, 2]
        assert cols.tolist() == [1, 2, 3, 2, 3, 3]

    def test_decode_pairs_large_index(self):
        n = 10**5
        last = n * (n - 1) // 2 - 1
        rows, cols = decode_pairs(n, np.array([last]))
        assert (int(rows[0]), int(cols[0])) == (n - 2, n - 1)

    def test_empty_graph(self, service):
        stats = service.sample_gnp_components(50, 0.0, seed=1)
        assert stats.largest == 1
        assert stats.s(2) == 50
        assert len(stats.sizes) == 50

    def test_complete_graph(self, service):
        stats = service.sample_gnp_components(30, 1.0, seed=1)
        assert stats.sizes.tolist() == [30]
        assert stats.s(2) == 900
        assert not functionals(stats).two_large

    def test_sizes_sorted_and_sum_to_n(self, service):
        stats = service.sample_gnp_components(5000, 1.0 / 5000, seed=9)
        sizes = np.asarray(stats.sizes)
        assert sizes.sum() == 5000
        assert np.all(np.diff(sizes) <= 0)
        assert stats.s(1) == 5000

    def test_same_seed_same_graph(self, service):
        a = service.sample_gnp_components(2000, 0.001, seed=5, replicate=3)
        b = service.sample_gnp_components(2000, 0.001, seed=5, replicate=3)
        c = service.sample_gnp_components(2000, 0.001, seed=5, replicate=4)
        assert a.sizes.tolist() == b.sizes.tolist()
        assert a.power_sums != c.power_sums or a.sizes.tolist() != c.sizes.tolist()

    def test_edge_budget(self):
        small = PercolationService(threads=1, max_edges=10)
        with pytest.raises(SimulationBudgetError):
            small.sample_gnp_components(100, 0.5, seed=1)

    def test_domain(self, service):
        with pytest.raises(DomainError):
            service.sample_gnp_components(0, 0.5, seed=1)
        with pytest.raises(DomainError):
            service.sample_gnp_components(10, 1.5, seed=1)

    def test_matches_exact_enumeration(self, service):
        n, p = 4, Fraction(3, 10)
        exact = OracleService().exact_small_n(n, p)
        draws = [service.sample_gnp_components(n, float(p), seed=2024, replicate=r) for r in range(4000)]
        s2 = np.array([d.s(2) for d in draws], dtype=float)
        pair = np.array([functionals(d).pair_product for d in draws], dtype=float)
        for values, target in ((s2, exact.expected_s[2]), (pair, exact.expected_pair_product)):
            stderr = values.std(ddof=1) / np.sqrt(values.size)
            assert abs(values.mean() - float(target)) < 4.0 * stderr


class TestPowerSums:
    def test_known_sizes(self):
        sums = power_sums(np.array([3, 1]))
        assert sums[1] == 4
        assert sums[2] == 10
        assert sums[4] == 82
        assert sums[6] == 730

    def test_exact_for_huge_components(self):
        sums = power_sums(np.array([10**6]))
        assert sums[6] == 10**36

    def test_functionals(self):
        stats = ComponentStats(n=4, p=0.5, seed=0, sizes=np.array([3, 1]), power_sums=power_sums(np.array([3, 1])))
        f = functionals(stats)
        assert f.pair_product == 18
        assert not f.two_large
        assert f.x[2] == pytest.approx(10 / 4 ** (4.0 / 3.0))


class TestCoupling:
    def test_single_p_matches_direct_draw(self, service):
        p = critical_p(3000, 0.5)
        coupled = service.coupled_sample(3000, [p], seed=17)[0]
        direct = service.sample_gnp_components(3000, p, seed=17)
        assert coupled.sizes.tolist() == direct.sizes.tolist()

    def test_monotone_in_p(self, service):
        n = 3000
        p_list = [critical_p(n, lam) for lam in (-2.0, 0.0, 2.0)]
        for seed in range(10):
            samples = service.coupled_sample(n, p_list, seed)
            s2 = [s.s(2) for s in samples]
            largest = [s.largest for s in samples]
            assert s2 == sorted(s2)
            assert largest == sorted(largest)
            assert [s.p for s in samples] == p_list

    def test_requires_ascending(self, service):
        with pytest.raises(PreconditionError):
            service.coupled_sample(100, [0.02, 0.01], seed=1)
        with pytest.raises(PreconditionError):
            service.coupled_sample(100, [], seed=1)


class TestEstimators:
    def test_replicates_independent_of_threads(self):
        one = PercolationService(threads=1).replicate_matrix(2000, 0.0, 12, seed=8)
        many = PercolationService(threads=3).replicate_matrix(2000, 0.0, 12, seed=8)
        np.testing.assert_array_equal(one, many)

    def test_replicate_matrix_cached(self, service):
        first = service.replicate_matrix(1000, 0.0, 5, seed=1)
        assert service.replicate_matrix(1000, 0.0, 5, seed=1) is first
        assert service.replicate_matrix(1000, 0.0, 5, seed=2) is not first

    def test_estimate_names_and_context(self, service):
        names = ["x2", "dlogchi", "d1", "d2", "twolarge", "dk3", "c1"]
        summaries = service.estimate(names, 2000, 0.0, 20, seed=3)
        assert [s.name for s in summaries] == names
        for s in summaries:
            assert s.n == 2000
            assert s.replicates == 20
            assert s.seed == 3
            assert s.p == pytest.approx(critical_p(2000, 0.0))
            lo, hi = s.ci95
            assert lo <= s.mean <= hi

    def test_every_estimand_supported(self, service):
        summaries = service.estimate(ESTIMANDS, 1000, 0.5, 5, seed=4)
        assert len(summaries) == len(ESTIMANDS)

    def test_unknown_estimand(self, service):
        with pytest.raises(PreconditionError):
            service.estimate(["x2", "x9"], 1000, 0.0, 5, seed=1)

    def test_moment_derivative_orders(self, service):
        assert service.estimate_moment_derivative(1000, 0.0, 2, 5, seed=1).name == "dk2"
        with pytest.raises(PreconditionError):
            service.estimate_moment_derivative(1000, 0.0, 5, 5, seed=1)

    def test_dk2_matches_d1(self, service):
        d1 = service.estimate_derivative_moments(1000, 0.0, 10, seed=6)["d1"]
        dk2 = service.estimate_moment_derivative(1000, 0.0, 2, 10, seed=6)
        assert dk2.mean == pytest.approx(d1.mean, rel=1e-12)

    def test_replicates_validated(self, service):
        with pytest.raises(PreconditionError):
            service.replicate_matrix(1000, 0.0, 0, seed=1)

    def test_largest_component_scale(self, service):
        summary = service.estimate_largest_component(5000, 0.0, 20, seed=2)
        assert 0.1 < summary.mean < 5.0

    def test_supercritical_two_large_rare(self, service):
        summary = service.two_large_components_freq(5000, 4.0, 20, seed=2)
        assert summary.mean <= 0.5


@pytest.mark.slow
@pytest.mark.montecarlo
class TestCriticalAcceptance:
    def test_susceptibility_at_lambda_zero(self):
        summary = PercolationService(threads=4).estimate_susceptibility(10**5, 0.0, 200, seed=42)
        assert abs(summary.mean - F_ZERO[2]) <= 4.0 * summary.stderr + 0.05 * F_ZERO[2]


def lambda_for(n: int, p: float) -> float:
    return (p - 1.0 / n) * n ** (4.0 / 3.0)


class TestExactSmallGraphs:
    def test_log_derivative_single_edge_graph(self, service):
        # S_2(p) = 2 + 2p, so n^(-4/3) S'/S = n^(-4/3) / (1 + p)
        summary = service.estimate_log_derivative(2, lambda_for(2, 0.3), 4000, seed=11)
        exact = 2 ** (-4.0 / 3.0) / (1.0 + summary.p)
        assert abs(summary.mean - exact) < 4.0 * summary.stderr

    def test_log_derivative_four_vertices(self, service):
        n = 4
        summary = service.estimate_log_derivative(n, lambda_for(n, 0.3), 4000, seed=12)
        poly = susceptibility_poly(n)
        exact = poly_eval(poly_derivative(poly), summary.p) / poly_eval(poly, summary.p) * n ** (-4.0 / 3.0)
        assert summary.p == pytest.approx(0.3)
        assert summary.stderr > 0
        assert abs(summary.mean - exact) < 4.0 * summary.stderr

    def test_first_derivative_four_vertices(self, service):
        n = 4
        d1 = service.estimate_derivative_moments(n, lambda_for(n, 0.3), 4000, seed=12)["d1"]
        p = d1.p
        exact = (1.0 - p) * poly_eval(poly_derivative(susceptibility_poly(n)), p) * n ** (-8.0 / 3.0)
        assert abs(d1.mean - exact) < 4.0 * d1.stderr


class TestStandardErrorScaling:
    def test_doubling_replicates_shrinks_stderr(self, service):
        small = service.estimate_susceptibility(2000, 0.0, 200, seed=21)
        large = service.estimate_susceptibility(2000, 0.0, 400, seed=21)
        assert 1.2 <= small.stderr / large.stderr <= 1.7


@pytest.fixture(scope="module")
def critical_run():
    service = PercolationService(threads=4)
    service.replicate_matrix(10**6, 0.0, 200, seed=42)
    return service


@pytest.mark.slow
@pytest.mark.montecarlo
class TestCriticalWindowMillion:
    def test_susceptibility(self, critical_run):
        summary = critical_run.estimate_susceptibility(10**6, 0.0, 200, seed=42)
        assert summary.within_relative(F_ZERO[2], 0.05)

    def test_log_derivative(self, critical_run):
        summary = critical_run.estimate_log_derivative(10**6, 0.0, 200, seed=42)
        assert summary.within_relative(DLOG_ZERO, 0.10)

    def test_first_derivative(self, critical_run):
        d1 = critical_run.estimate_derivative_moments(10**6, 0.0, 200, seed=42)["d1"]
        assert d1.within_relative(D1_ZERO, 0.10)

    def test_second_derivative(self, critical_run):
        d2 = critical_run.estimate_derivative_moments(10**6, 0.0, 200, seed=42)["d2"]
        assert d2.within_relative(D2_ZERO, 0.25)

    def test_two_large_components_positive(self, critical_run):
        summary = critical_run.two_large_components_freq(10**6, 0.0, 200, seed=42)
        assert summary.mean > 0
        assert summary.excludes_zero()
