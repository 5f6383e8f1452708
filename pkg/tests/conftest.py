"""
Shared fixtures: degree sequences and sampled environments used across the test modules
"""

import pytest

from degrees import build_degree_sequence, from_groups, mixture_groups
from graphmodel import Environment, sample_connected_environment
from schemas import AcceptanceSettings


@pytest.fixture(scope="session")
def regular_seq():
    """3-regular digraph degrees on 100 vertices"""
    return build_degree_sequence([(3, 3)] * 100)


@pytest.fixture(scope="session")
def mixture_seq():
    """The 15000-vertex three-class mixture"""
    return from_groups(mixture_groups(15000))


@pytest.fixture(scope="session")
def small_mixture_seq():
    """Same mixture at n = 3000"""
    return from_groups(mixture_groups(3000))


@pytest.fixture(scope="session")
def balanced_seq():
    """d^+ = d^- at every vertex, so pi* = pi_0"""
    return build_degree_sequence([(2, 2), (3, 3), (3, 3), (2, 2), (4, 4)])


@pytest.fixture(scope="session")
def regular_env(regular_seq):
    env, _ = sample_connected_environment(regular_seq, 11)
    return env


@pytest.fixture(scope="session")
def small_mixture_env(small_mixture_seq):
    env, _ = sample_connected_environment(small_mixture_seq, 5)
    return env


@pytest.fixture(scope="session")
def balanced_env(balanced_seq):
    env, _ = sample_connected_environment(balanced_seq, 3)
    return env


@pytest.fixture
def periodic_env():
    """0 -> 1 -> 0 with a double arc back: the walk has period 2"""
    seq = build_degree_sequence([(2, 1), (1, 2)])
    return Environment.from_heads(seq, [1, 0, 0])


@pytest.fixture
def split_env():
    """Two self-loops: not strongly connected"""
    seq = build_degree_sequence([(1, 1), (1, 1)])
    return Environment.from_heads(seq, [0, 1])


@pytest.fixture
def tiny_settings():
    """Acceptance suite shrunk to seconds"""
    return AcceptanceSettings(
        seed=99,
        oracle_envs=8,
        oracle_max_t=3,
        equilibrium_envs=6,
        mixture_n=3000,
        mixture_seeds=2,
        required_seeds=2,
        martingale_trees=5000,
        martingale_t_max=4,
        se_band=4.0,
        rde_pool=2000,
        rde_iterations=5,
        m_star_samples=2000,
        w1_sizes=[600, 1200],
        w1_seeds=2,
        collision_seeds=300,
        clt_samples=20000,
    )
