"""
Oracle Tests

This module tests the brute-force references themselves:
- Random small sequences are valid
- Exhaustive environment enumeration and its averages
- Path sums and the dense stationary solve on hand-checked cases
- The enumerated law of Z after a few sweeps
"""

import math

import numpy as np
import pytest

from degrees import build_degree_sequence
from errors import StateSpaceTooLarge
from oracles import (
    all_environments,
    dense_stationary,
    path_sum_distribution,
    path_weight_tail,
    random_small_sequence,
    rde_exact_law,
)
from provenance import task_stream


class TestRandomSmallSequence:
    """Test random_small_sequence"""

    def test_bounds(self):
        """Test vertex and arc counts stay within the limits"""
        for k in range(50):
            seq = random_small_sequence(task_stream(1, k), max_n=6, max_m=12)
            assert 1 <= seq.n <= 6
            assert seq.n <= seq.m <= 12
            assert seq.delta >= 1

    def test_reproducible(self):
        """Test that a stream fixes the sequence"""
        assert random_small_sequence(task_stream(2, 3)) == random_small_sequence(task_stream(2, 3))


class TestAllEnvironments:
    """Test all_environments"""

    def test_count(self):
        """Test that every one of the m! bijections is produced"""
        seq = build_degree_sequence([(1, 2), (3, 2)])
        envs = list(all_environments(seq))
        assert len(envs) == math.factorial(seq.m)

    def test_average_transition(self):
        """Test that the environment-averaged first step hits heads uniformly"""
        seq = build_degree_sequence([(1, 2), (3, 2)])
        envs = list(all_environments(seq))
        mean_row = np.mean([path_sum_distribution(env, 0, 1) for env in envs], axis=0)
        assert mean_row == pytest.approx(seq.d_minus / seq.m)


class TestPathSums:
    """Test path_sum_distribution, path_weight_tail and dense_stationary"""

    def test_periodic(self, periodic_env):
        """Test path sums on the period-2 chain"""
        assert path_sum_distribution(periodic_env, 1, 1).tolist() == [1.0, 0.0]
        assert path_sum_distribution(periodic_env, 1, 0).tolist() == [0.0, 1.0]

    def test_weight_tail(self, periodic_env):
        """Test that only paths strictly heavier than theta count"""
        # from 1 every path leaves 1 once (weight 1/2 per tail) then 0 once (weight 1)
        assert path_weight_tail(periodic_env, 1, 2, 0.4) == pytest.approx(1.0)
        assert path_weight_tail(periodic_env, 1, 2, 0.5) == 0.0

    def test_dense_stationary(self, periodic_env):
        """Test the direct solve on the period-2 chain"""
        assert dense_stationary(periodic_env) == pytest.approx([0.5, 0.5])


class TestRdeExactLaw:
    """Test rde_exact_law"""

    def test_hand_checked(self):
        """Test the one- and two-sweep laws of a two-class sequence"""
        seq = build_degree_sequence([(1, 2), (3, 2)])
        values, probs = rde_exact_law(seq, 1)
        assert values.tolist() == pytest.approx([0.5, 1.5])
        assert probs.tolist() == pytest.approx([0.5, 0.5])
        values, probs = rde_exact_law(seq, 2)
        assert values.tolist() == pytest.approx([0.25, 0.75, 1.25, 1.75, 2.25])
        assert probs.tolist() == pytest.approx([0.25, 0.3125, 0.1875, 0.1875, 0.0625])

    def test_moments(self):
        """Test mean one and E[Z^2] = 1.375 after two sweeps"""
        seq = build_degree_sequence([(1, 2), (3, 2)])
        values, probs = rde_exact_law(seq, 2)
        assert math.fsum(probs.tolist()) == pytest.approx(1.0)
        assert float(probs @ values) == pytest.approx(1.0)
        assert float(probs @ values ** 2) == pytest.approx(1.375)

    def test_regular(self, regular_seq):
        """Test that a regular sequence keeps the point mass at 1"""
        values, probs = rde_exact_law(regular_seq, 3)
        assert values.tolist() == pytest.approx([1.0])
        assert probs.tolist() == pytest.approx([1.0])

    def test_too_many_atoms(self):
        """Test the atom cap"""
        seq = build_degree_sequence([(1, 2), (3, 2)])
        with pytest.raises(StateSpaceTooLarge):
            rde_exact_law(seq, 4, max_atoms=10)
