"""
Exact distribution evolution for the random walk

Distributions are dense probability vectors advanced with the sparse
transition matrix of an environment, one O(m) pass per step. From them we
get total-variation distances, the proxy equilibrium pi_h, the equilibrium
pi* (power iteration) and the distance profiles that exhibit cutoff.
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from degrees import SeqStats, compute_stats, proxy_horizon
from errors import ContextMismatch, InvalidParameter, NoConvergence, NotStronglyConnected, RhoOne
from graphmodel import Environment, strongly_connected
from provenance import SeedLike, make_rng

logger = logging.getLogger(__name__)

Target = Literal["proxy", "exact"]
StartPolicy = Literal["auto", "full", "sampled"]

# Slack on the total mass accepted when a Distribution is built
_MASS_SLACK = 1e-12
# Longest cycle the oscillation watch looks for
_MAX_PERIOD = 16


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over the vertices of one environment"""

    probs: np.ndarray
    env: Environment

    def __post_init__(self):
        if self.probs.shape != (self.env.n,):
            raise ContextMismatch(f"Vector of length {self.probs.size} does not fit an environment with n={self.env.n}")
        if self.probs.min() < 0.0:
            raise InvalidParameter("Probabilities must be non-negative")
        total = self.probs.sum()
        if abs(total - 1.0) > _MASS_SLACK:
            raise InvalidParameter(f"Probabilities sum to {total!r}, not 1")

    @classmethod
    def point_mass(cls, env: Environment, i: int) -> "Distribution":
        probs = np.zeros(env.n)
        probs[i] = 1.0
        return cls(probs, env)

    @classmethod
    def in_degree(cls, env: Environment) -> "Distribution":
        """pi_0(i) = d_i^- / m"""
        return cls(env.seq.d_minus / env.m, env)


@dataclass(frozen=True, eq=False)
class WalkProfile:
    """
    TV distances to a target over time, for a set of start vertices

    tv[k, t] is the distance at time times[t] of the walk started at
    start_set[k]; lambdas are the window coordinates (t - t*) / w*
    (NaN when w* = 0).
    """

    times: np.ndarray
    start_set: list[int]
    tv: np.ndarray
    lambdas: np.ndarray
    target: Target

    @property
    def tv_min(self) -> np.ndarray:
        return self.tv.min(axis=0)

    @property
    def tv_mean(self) -> np.ndarray:
        return self.tv.mean(axis=0)

    @property
    def tv_max(self) -> np.ndarray:
        return self.tv.max(axis=0)

    def is_monotone(self, slack: float = 1e-9, from_time: int = 0) -> bool:
        """Every row non-increasing in t (from from_time on) up to slack"""
        rows = self.tv[:, self.times >= from_time]
        return bool(np.all(np.diff(rows, axis=1) <= slack))


class EquilibriumResult(NamedTuple):
    distribution: Distribution
    iterations: int
    cesaro_fallbacks: int


def _check_context(a: Distribution, b: Distribution):
    if a.env is not b.env:
        raise ContextMismatch("Distributions refer to different environments")


def step(env: Environment, dist: Distribution) -> Distribution:
    """
    One step of the walk: dist P

    Each vertex i sends probs[i] / d_i^+ along each of its tails.
    """
    if dist.env is not env:
        raise ContextMismatch("Distribution refers to another environment")
    return Distribution(env.transition_T @ dist.probs, env)


def dist_from_vertex(env: Environment, i: int, t: int) -> Distribution:
    """P^t(i, .), the law of the walk started at i after t steps"""
    if t < 0:
        raise InvalidParameter(f"t must be non-negative, got {t}")
    dist = Distribution.point_mass(env, i)
    for _ in range(t):
        dist = step(env, dist)
    return dist


def tv_distance(a: Distribution, b: Distribution) -> float:
    """Half L1 distance between two distributions on the same environment"""
    _check_context(a, b)
    return float(min(1.0, 0.5 * np.abs(a.probs - b.probs).sum()))


def advance(env: Environment, dist: Distribution, t: int) -> Distribution:
    for _ in range(t):
        dist = step(env, dist)
    return dist


def proxy_equilibrium(env: Environment) -> Distribution:
    """
    pi_h = pi_0 P^h with h = floor(ln n / (10 ln Delta))

    Raises:
        DegenerateDelta: Delta < 2
    """
    h = proxy_horizon(env.seq)
    return advance(env, Distribution.in_degree(env), h)


def _cycle_average(history: list[np.ndarray], new: np.ndarray, tol: float) -> np.ndarray | None:
    """
    Average over a detected cycle of iterates, or None

    A cycle of period p shows up as new being within tol of the iterate p
    steps back while consecutive iterates still differ.
    """
    for period in range(2, min(_MAX_PERIOD, len(history)) + 1):
        back = history[-period]
        if 0.5 * np.abs(new - back).sum() < tol:
            cycle = history[-period + 1:] + [new]
            return np.mean(cycle, axis=0)
    return None


def equilibrium(env: Environment, tol: float = 1e-12, max_iters: int = 100_000) -> EquilibriumResult:
    """
    Power iteration from pi_0 to the equilibrium measure pi*

    Iterates pi <- pi P until consecutive iterates are within tol in total
    variation and the candidate satisfies ||pi P - pi||_TV < tol. If the
    iterates settle on a cycle (periodic chain), the cycle is averaged and
    the iteration continues from the average; every such fallback is counted.

    Args:
        env: Environment, must be strongly connected
        tol: TV tolerance
        max_iters: Iteration cap

    Returns:
        EquilibriumResult: (distribution, iterations, cesaro_fallbacks)

    Raises:
        NotStronglyConnected: pi* is not unique
        NoConvergence: no fixed point within max_iters
    """
    if not strongly_connected(env):
        raise NotStronglyConnected("Equilibrium requires a strongly connected environment")

    P_T = env.transition_T
    current = env.seq.d_minus / env.m
    history = [current]
    fallbacks = 0
    for iteration in range(1, max_iters + 1):
        new = P_T @ current
        gap = 0.5 * np.abs(new - current).sum()
        if gap < tol:
            residual = 0.5 * np.abs(P_T @ new - new).sum()
            if residual < tol:
                logger.debug("Equilibrium reached after %d iterations", iteration)
                new = new / new.sum()
                return EquilibriumResult(Distribution(new, env), iteration, fallbacks)
        else:
            averaged = _cycle_average(history, new, tol)
            if averaged is not None:
                fallbacks += 1
                logger.warning("Oscillating iterates at iteration %d, averaging the cycle", iteration)
                new = averaged
                history = []
        history.append(new)
        if len(history) > _MAX_PERIOD:
            history.pop(0)
        current = new
    raise NoConvergence(f"Power iteration did not converge within {max_iters} iterations")


def convergence_bound(stats: SeqStats, n: int, m: int, t: int) -> float:
    """
    TV bound from a uniform head: sqrt(n (gamma - 1) rho^t / (m (1 - rho))) / 2

    The vanishing correction term of the asymptotic statement is ignored.

    Raises:
        RhoOne: rho >= 1
    """
    if stats.rho >= 1.0:
        raise RhoOne(f"rho = {stats.rho} >= 1, the bound is undefined")
    excess = max(stats.gamma - 1.0, 0.0)
    return math.sqrt(n * excess * stats.rho ** t / (m * (1.0 - stats.rho))) / 2.0


def window_times(stats: SeqStats, half_width: float = 4.0) -> np.ndarray:
    """Integer times in [t* - a w*, t* + a w*], clipped at 0"""
    low = max(0, math.ceil(stats.t_star - half_width * stats.w_star))
    high = math.floor(stats.t_star + half_width * stats.w_star)
    return np.arange(low, high + 1)


def window_coordinates(times: np.ndarray, stats: SeqStats) -> np.ndarray:
    if stats.w_star == 0.0:
        return np.full(times.shape, np.nan)
    return (times - stats.t_star) / stats.w_star


def select_starts(
    env: Environment,
    seed: SeedLike,
    policy: StartPolicy = "auto",
    sample_size: int = 50,
    n_lowest: int = 10,
    full_threshold: int = 2000,
    pi_star: Distribution | None = None,
) -> list[int]:
    """
    Start vertices for a distance profile

    "full" takes every vertex; "sampled" takes a seeded uniform sample plus
    the n_lowest vertices of smallest equilibrium mass (the worst-case
    candidates, only when pi_star is given); "auto" is full for
    n <= full_threshold and sampled otherwise.

    Returns:
        Sorted list of distinct vertex ids
    """
    if policy == "auto":
        policy = "full" if env.n <= full_threshold else "sampled"
    if policy == "full":
        return list(range(env.n))

    rng = make_rng(seed)
    chosen = set(rng.choice(env.n, size=min(sample_size, env.n), replace=False).tolist())
    if pi_star is not None and n_lowest > 0:
        lowest = np.argsort(pi_star.probs, kind="stable")[:n_lowest]
        chosen.update(lowest.tolist())
    return sorted(chosen)


def distance_profile(
    env: Environment,
    start_set: Sequence[int],
    t_max: int,
    target: Target = "proxy",
    tol: float = 1e-12,
    target_dist: Distribution | None = None,
) -> WalkProfile:
    """
    TV distance to equilibrium along time, for every start in start_set

    All starts are evolved together as the columns of an n x k matrix; rows
    of the result are ordered by start id so the min/mean/max summaries do
    not depend on how the set was given.

    Args:
        env: Environment
        start_set: Start vertices
        t_max: Last time step (times 0..t_max are recorded)
        target: "proxy" for pi_h, "exact" for pi*
        tol: Tolerance handed to the equilibrium solver
        target_dist: Precomputed target, skips the solve

    Raises:
        InvalidParameter: empty start set or t_max < 1
        NotStronglyConnected, NoConvergence: from the solver when target is exact
    """
    if t_max < 1:
        raise InvalidParameter(f"t_max must be at least 1, got {t_max}")
    starts = sorted(set(int(i) for i in start_set))
    if not starts:
        raise InvalidParameter("start_set must not be empty")

    if target_dist is None:
        target_dist = equilibrium(env, tol).distribution if target == "exact" else proxy_equilibrium(env)
    pi = target_dist.probs[:, None]

    states = np.zeros((env.n, len(starts)))
    states[starts, np.arange(len(starts))] = 1.0
    tv = np.empty((len(starts), t_max + 1))
    for t in range(t_max + 1):
        if t > 0:
            states = env.transition_T @ states
        tv[:, t] = np.minimum(1.0, 0.5 * np.abs(states - pi).sum(axis=0))

    times = np.arange(t_max + 1)
    stats = compute_stats(env.seq)
    return WalkProfile(
        times=times,
        start_set=starts,
        tv=tv,
        lambdas=window_coordinates(times, stats),
        target=target,
    )
