"""
Random Walk Tests

This module tests:
- Distribution validation and single steps
- Exact walk laws against path enumeration
- Proxy and exact equilibrium (including periodic chains)
- The exponential convergence bound and window helpers
- Start selection and distance profiles
"""

import math

import numpy as np
import pytest

from degrees import SeqStats, compute_stats
from errors import ContextMismatch, InvalidParameter, NoConvergence, NotStronglyConnected, RhoOne
from graphmodel import sample_environment, strongly_connected
from oracles import dense_stationary, path_sum_distribution, random_small_sequence
from provenance import task_stream
from walk import (
    Distribution,
    advance,
    convergence_bound,
    dist_from_vertex,
    distance_profile,
    equilibrium,
    proxy_equilibrium,
    select_starts,
    step,
    tv_distance,
    window_coordinates,
    window_times,
)


def _stats(rho: float, gamma: float = 1.5) -> SeqStats:
    return SeqStats(mu=1.0, sigma2=0.1, rho=rho, gamma=gamma, t_star=5.0, w_star=1.0, delta=1, delta_max=3)


class TestDistribution:
    """Test Distribution validation and constructors"""

    def test_point_mass(self, regular_env):
        """Test a Dirac mass"""
        dist = Distribution.point_mass(regular_env, 4)
        assert dist.probs[4] == 1.0
        assert dist.probs.sum() == 1.0

    def test_in_degree(self, small_mixture_env):
        """Test pi_0(i) = d_i^- / m"""
        dist = Distribution.in_degree(small_mixture_env)
        assert dist.probs[0] == pytest.approx(small_mixture_env.seq.d_minus[0] / small_mixture_env.m)

    def test_wrong_length(self, regular_env):
        """Test a vector of the wrong size"""
        with pytest.raises(ContextMismatch):
            Distribution(np.ones(3) / 3, regular_env)

    def test_negative_mass(self, periodic_env):
        """Test negative entries"""
        with pytest.raises(InvalidParameter):
            Distribution(np.array([1.5, -0.5]), periodic_env)

    def test_mass_not_one(self, periodic_env):
        """Test a vector that is not normalized"""
        with pytest.raises(InvalidParameter):
            Distribution(np.array([0.5, 0.6]), periodic_env)

    def test_mass_slack_is_tight(self, periodic_env):
        """Test that a total mass off by 1e-10 is rejected"""
        with pytest.raises(InvalidParameter):
            Distribution(np.array([0.5, 0.5 + 1e-10]), periodic_env)
        assert Distribution(np.array([0.25, 0.75]), periodic_env).probs.sum() == 1.0

    def test_long_run_keeps_mass(self, small_mixture_env):
        """Test that hundreds of steps stay inside the mass tolerance"""
        dist = advance(small_mixture_env, Distribution.in_degree(small_mixture_env), 300)
        assert abs(dist.probs.sum() - 1.0) <= 1e-12


class TestStep:
    """Test step, dist_from_vertex and tv_distance"""

    def test_self_loop(self, split_env):
        """Test that a self-loop keeps the walk in place"""
        dist = step(split_env, Distribution.point_mass(split_env, 1))
        assert dist.probs.tolist() == [0.0, 1.0]

    def test_periodic(self, periodic_env):
        """Test the alternation of a period-2 chain"""
        assert dist_from_vertex(periodic_env, 0, 1).probs.tolist() == [0.0, 1.0]
        assert dist_from_vertex(periodic_env, 0, 2).probs.tolist() == [1.0, 0.0]

    def test_mass_conserved(self, small_mixture_env):
        """Test that ten steps keep total mass one"""
        dist = dist_from_vertex(small_mixture_env, 17, 10)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert dist.probs.min() >= 0.0

    def test_regular_step(self, regular_env):
        """Test that one step from a vertex puts mass in thirds"""
        probs = dist_from_vertex(regular_env, 0, 1).probs
        assert np.allclose(probs * 3, np.round(probs * 3))

    def test_negative_time(self, regular_env):
        """Test t < 0"""
        with pytest.raises(InvalidParameter):
            dist_from_vertex(regular_env, 0, -1)

    def test_foreign_distribution(self, regular_env, small_mixture_env):
        """Test stepping a distribution of another environment"""
        with pytest.raises(ContextMismatch):
            step(regular_env, Distribution.point_mass(small_mixture_env, 0))

    def test_matches_path_enumeration(self):
        """Test P^t(i, .) against the explicit sum over paths"""
        for k in range(10):
            seq = random_small_sequence(task_stream(3, k))
            env = sample_environment(seq, task_stream(4, k))
            for t in range(4):
                got = dist_from_vertex(env, 0, t).probs
                assert got == pytest.approx(path_sum_distribution(env, 0, t), abs=1e-12)

    def test_tv_distance(self, regular_env, small_mixture_env):
        """Test TV of point masses and the context check"""
        a = Distribution.point_mass(regular_env, 0)
        b = Distribution.point_mass(regular_env, 1)
        assert tv_distance(a, b) == 1.0
        assert tv_distance(a, a) == 0.0
        with pytest.raises(ContextMismatch):
            tv_distance(a, Distribution.point_mass(small_mixture_env, 0))


class TestEquilibrium:
    """Test proxy_equilibrium and equilibrium"""

    def test_proxy_is_pi_zero_at_small_n(self, small_mixture_env):
        """Test that h = 0 gives pi_h = pi_0"""
        proxy = proxy_equilibrium(small_mixture_env)
        assert np.array_equal(proxy.probs, Distribution.in_degree(small_mixture_env).probs)

    def test_regular_is_uniform(self, regular_env):
        """Test the uniform equilibrium of a regular digraph"""
        result = equilibrium(regular_env)
        assert result.distribution.probs == pytest.approx(np.full(100, 0.01), abs=1e-12)

    def test_balanced_is_pi_zero(self, balanced_env):
        """Test that d^+ = d^- makes pi_0 stationary at once"""
        result = equilibrium(balanced_env)
        assert result.iterations <= 2
        assert result.distribution.probs == pytest.approx(Distribution.in_degree(balanced_env).probs, abs=1e-12)

    def test_periodic_cesaro(self, periodic_env):
        """Test that the oscillation is averaged"""
        result = equilibrium(periodic_env)
        assert result.distribution.probs == pytest.approx([0.5, 0.5], abs=1e-12)
        assert result.cesaro_fallbacks >= 1

    def test_matches_dense_solve(self):
        """Test power iteration against a direct linear solve"""
        checked = 0
        for k in range(40):
            env = sample_environment(random_small_sequence(task_stream(8, k), max_n=8, max_m=16), task_stream(9, k))
            if not strongly_connected(env):
                continue
            result = equilibrium(env)
            assert result.distribution.probs == pytest.approx(dense_stationary(env), abs=1e-9)
            checked += 1
        assert checked > 0

    def test_residual(self, small_mixture_env):
        """Test ||pi* P - pi*||_TV below the tolerance"""
        pi = equilibrium(small_mixture_env).distribution
        assert tv_distance(step(small_mixture_env, pi), pi) < 1e-11

    def test_not_connected(self, split_env):
        """Test that a reducible chain is rejected"""
        with pytest.raises(NotStronglyConnected):
            equilibrium(split_env)

    def test_no_convergence(self, small_mixture_env):
        """Test the iteration cap"""
        with pytest.raises(NoConvergence):
            equilibrium(small_mixture_env, max_iters=1)


class TestBoundAndWindow:
    """Test convergence_bound, window_times and window_coordinates"""

    def test_mixture_bound(self, mixture_seq):
        """Test the bound at t = 0 on the mixture"""
        stats = compute_stats(mixture_seq)
        bound = convergence_bound(stats, mixture_seq.n, mixture_seq.m, 0)
        assert bound == pytest.approx(math.sqrt(1000 / 35000) / 2, rel=1e-9)
        assert bound == pytest.approx(0.0845, abs=1e-4)

    def test_bound_decreases(self, mixture_seq):
        """Test geometric decay in t"""
        stats = compute_stats(mixture_seq)
        values = [convergence_bound(stats, mixture_seq.n, mixture_seq.m, t) for t in range(10)]
        assert all(b > a for a, b in zip(values[1:], values[:-1]))
        assert values[2] == pytest.approx(values[0] * 0.3, rel=1e-9)

    def test_regular_bound_is_zero(self, regular_seq):
        """Test gamma = 1"""
        assert convergence_bound(compute_stats(regular_seq), 100, 300, 0) == 0.0

    def test_rho_one(self):
        """Test that rho = 1 is rejected"""
        with pytest.raises(RhoOne):
            convergence_bound(_stats(rho=1.0), 10, 10, 0)

    def test_window_times(self, mixture_seq):
        """Test the integer times of the +-4 w* grid"""
        assert window_times(compute_stats(mixture_seq)).tolist() == [7, 8, 9]

    def test_window_times_clipped(self):
        """Test clipping at zero"""
        assert window_times(_stats(0.5), half_width=10.0).tolist() == list(range(0, 16))

    def test_window_coordinates(self, regular_seq):
        """Test lambda = (t - t*) / w* and NaN for w* = 0"""
        times = np.arange(3)
        assert window_coordinates(times, _stats(0.5)).tolist() == [-5.0, -4.0, -3.0]
        assert np.isnan(window_coordinates(times, compute_stats(regular_seq))).all()


class TestProfiles:
    """Test select_starts and distance_profile"""

    def test_full_policy(self, regular_env):
        """Test that small environments use every vertex"""
        assert select_starts(regular_env, 1) == list(range(100))

    def test_sampled_policy(self, small_mixture_env):
        """Test the sampled set plus the lowest-mass vertices"""
        pi = proxy_equilibrium(small_mixture_env)
        starts = select_starts(small_mixture_env, 3, "sampled", sample_size=20, n_lowest=5, pi_star=pi)
        assert starts == sorted(set(starts))
        assert 20 <= len(starts) <= 25
        lowest = np.argsort(pi.probs, kind="stable")[:5].tolist()
        assert set(lowest) <= set(starts)
        assert starts == select_starts(small_mixture_env, 3, "sampled", sample_size=20, n_lowest=5, pi_star=pi)

    def test_regular_profile(self, regular_env):
        """Test the profile shape, t = 0 value and monotonicity"""
        profile = distance_profile(regular_env, [5, 1, 5], 8, target="exact")
        assert profile.start_set == [1, 5]
        assert profile.tv.shape == (2, 9)
        assert profile.tv[:, 0] == pytest.approx([0.99, 0.99])
        assert profile.is_monotone()
        assert np.isnan(profile.lambdas).all()

    def test_matches_single_start(self, small_mixture_env):
        """Test batched evolution against one start at a time"""
        pi = proxy_equilibrium(small_mixture_env)
        profile = distance_profile(small_mixture_env, [3, 9], 5, target_dist=pi)
        for row, i in enumerate(profile.start_set):
            for t in range(6):
                expected = tv_distance(dist_from_vertex(small_mixture_env, i, t), pi)
                assert profile.tv[row, t] == pytest.approx(expected, abs=1e-12)

    def test_summaries(self, small_mixture_env):
        """Test min <= mean <= max"""
        profile = distance_profile(small_mixture_env, range(0, 3000, 300), 6)
        assert np.all(profile.tv_min <= profile.tv_mean + 1e-15)
        assert np.all(profile.tv_mean <= profile.tv_max + 1e-15)

    def test_mixes_after_twice_t_star(self, small_mixture_env):
        """Test that the walk has mixed well past t*"""
        stats = compute_stats(small_mixture_env.seq)
        t_max = math.ceil(2 * stats.t_star)
        profile = distance_profile(small_mixture_env, range(0, 3000, 100), t_max, target="exact")
        assert profile.tv_max[0] > 0.99
        assert profile.tv_max[-1] < 0.1
        assert profile.is_monotone(slack=1e-9)

    def test_invalid(self, regular_env):
        """Test t_max < 1 and an empty start set"""
        with pytest.raises(InvalidParameter):
            distance_profile(regular_env, [0], 0)
        with pytest.raises(InvalidParameter):
            distance_profile(regular_env, [], 5)
