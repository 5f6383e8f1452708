"""
Path-weight statistics

The weight of a walk path i_0 -> ... -> i_t is the product of 1/d^+ over the
t vertices it leaves, i.e. the probability that the walk follows it. This
module estimates the quenched probability Q_{i,t}(theta) of following a path
heavier than theta, the annealed i.i.d. counterpart q_t(theta), and compares
measured distance profiles with the Gaussian tail of the cutoff window.

Weights are never multiplied out: a path is summarised by how many times it
left a vertex of each distinct out-degree, and compared with theta in the log
domain, so no t underflows.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erfc
from scipy.stats import multinomial

from degrees import DegreeSequence, SeqStats, compositions, degree_classes
from errors import DegenerateWindow, InvalidParameter, StateSpaceTooLarge
from graphmodel import Environment
from provenance import SeedLike, make_rng
from walk import WalkProfile, window_times

logger = logging.getLogger(__name__)

# Log-weights within this (relative) distance of log(theta) count as ties,
# and ties never exceed theta
TIE_TOLERANCE = 1e-12
# Largest number of (exponent vector, vertex) states the exact propagation keeps
MAX_EXACT_STATES = 100_000
# Largest number of atoms the exact annealed law enumerates
MAX_ANNEALED_ATOMS = 1_000_000
# Monte Carlo walks per start
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class WeightQuery:
    """A path length t and a weight threshold theta = exp(log_theta)"""

    t: int
    theta: float
    log_theta: float

    def __post_init__(self):
        if self.t < 1:
            raise InvalidParameter(f"t must be at least 1, got {self.t}")

    @classmethod
    def from_theta(cls, t: int, theta: float) -> "WeightQuery":
        if not 0.0 < theta <= 1.0:
            raise InvalidParameter(f"theta must lie in (0, 1], got {theta}")
        return cls(t=t, theta=theta, log_theta=math.log(theta))

    @classmethod
    def from_log(cls, t: int, log_theta: float) -> "WeightQuery":
        """Preferred constructor for tiny thresholds such as exp(-mu t)"""
        if log_theta > 0.0:
            raise InvalidParameter(f"log_theta must be <= 0, got {log_theta}")
        return cls(t=t, theta=math.exp(log_theta), log_theta=log_theta)


@dataclass(frozen=True)
class WindowReport:
    times: np.ndarray
    lambda_grid: np.ndarray
    tv_values: np.ndarray
    gaussian_values: np.ndarray
    sup_gap: float

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.tv_values - self.gaussian_values)


def exceeds(log_weight, log_theta: float):
    """Strict log-domain comparison w > theta, ties broken toward 'not exceeding'"""
    return np.asarray(log_weight) > log_theta + TIE_TOLERANCE * max(1.0, abs(log_theta))


def _out_degree_levels(d_plus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct out-degree values and their logs"""
    values = np.unique(d_plus).astype(np.int64)
    return values, np.log(values.astype(np.float64))


def quenched_q(
    env: Environment, i: int, q: WeightQuery, n_samples: int = DEFAULT_SAMPLES, *, seed: SeedLike
) -> tuple[float, float]:
    """
    Monte Carlo estimate of Q_{i,t}(theta) under a fixed environment

    Walks of length t start at i; each records how many times it left a
    vertex of every out-degree level. Reusing a seed reuses the walks, so
    estimates for different thetas are monotone by construction.

    Returns:
        (estimate, std_error): fraction of walks heavier than theta and its
        binomial standard error
    """
    if n_samples < 1:
        raise InvalidParameter(f"n_samples must be at least 1, got {n_samples}")
    rng = make_rng(seed)
    seq = env.seq
    values, logs = _out_degree_levels(seq.d_plus)
    level = np.searchsorted(values, seq.d_plus)

    position = np.full(n_samples, i, dtype=np.int64)
    counts = np.zeros((n_samples, values.size), dtype=np.int64)
    rows = np.arange(n_samples)
    for _ in range(q.t):
        out = seq.d_plus[position]
        counts[rows, level[position]] += 1
        tail = seq.offsets[position] + rng.integers(0, out)
        position = env.heads[tail]

    log_weight = -(counts @ logs)
    hits = exceeds(log_weight, q.log_theta)
    estimate = float(hits.mean())
    return estimate, math.sqrt(estimate * (1.0 - estimate) / n_samples)


def quenched_q_exact(env: Environment, i: int, q: WeightQuery) -> float:
    """
    Exact Q_{i,t}(theta) by propagating (exponent vector, position) jointly

    Raises:
        StateSpaceTooLarge: more than MAX_EXACT_STATES non-zero states at some step
    """
    seq = env.seq
    values, logs = _out_degree_levels(seq.d_plus)
    masks = [(seq.d_plus == v).astype(np.float64) for v in values]

    start = np.zeros(env.n)
    start[i] = 1.0
    states: dict[tuple[int, ...], np.ndarray] = {(0,) * values.size: start}
    for _ in range(q.t):
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for key, vec in states.items():
            for k, mask in enumerate(masks):
                part = vec * mask
                if not part.any():
                    continue
                moved = env.transition_T @ part
                new_key = key[:k] + (key[k] + 1,) + key[k + 1:]
                if new_key in nxt:
                    nxt[new_key] += moved
                else:
                    nxt[new_key] = moved
        size = sum(int(np.count_nonzero(v)) for v in nxt.values())
        if size > MAX_EXACT_STATES:
            raise StateSpaceTooLarge(f"{size} states exceed the limit of {MAX_EXACT_STATES}")
        states = nxt

    total = 0.0
    for key, vec in states.items():
        if exceeds(-float(np.dot(key, logs)), q.log_theta):
            total += vec.sum()
    return float(total)


def annealed_q(
    seq: DegreeSequence, q: WeightQuery, n_samples: int = DEFAULT_SAMPLES, *, seed: SeedLike
) -> tuple[float, float]:
    """
    Monte Carlo estimate of q_t(theta) = P(prod 1/D_k > theta), D_k i.i.d.

    D_k follows the out-degree seen from a uniformly chosen head,
    P(D = d) = (1/m) sum_i d_i^- 1(d_i^+ = d). A sample is the multinomial
    count of each level among t draws.
    """
    if n_samples < 1:
        raise InvalidParameter(f"n_samples must be at least 1, got {n_samples}")
    rng = make_rng(seed)
    values, probs = degree_classes(seq).out_values()
    counts = rng.multinomial(q.t, probs, size=n_samples)
    log_weight = -(counts @ np.log(values.astype(np.float64)))
    estimate = float(exceeds(log_weight, q.log_theta).mean())
    return estimate, math.sqrt(estimate * (1.0 - estimate) / n_samples)


def annealed_law(seq: DegreeSequence, t: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Exact law of the annealed log-weight -sum ln D_k after t draws

    Returns:
        (log_weights, probs), sorted by log-weight

    Raises:
        StateSpaceTooLarge: more than MAX_ANNEALED_ATOMS count vectors
    """
    values, probs = degree_classes(seq).out_values()
    atoms = math.comb(t + values.size - 1, values.size - 1)
    if atoms > MAX_ANNEALED_ATOMS:
        raise StateSpaceTooLarge(f"{atoms} atoms exceed the limit of {MAX_ANNEALED_ATOMS}")
    counts = np.array(list(compositions(t, values.size)), dtype=np.int64)
    pmf = multinomial.pmf(counts, n=t, p=probs)
    log_weights = -(counts @ np.log(values.astype(np.float64)))
    order = np.argsort(log_weights, kind="stable")
    return log_weights[order], np.asarray(pmf)[order]


def annealed_q_exact(seq: DegreeSequence, q: WeightQuery) -> float:
    log_weights, probs = annealed_law(seq, q.t)
    return float(math.fsum(probs[exceeds(log_weights, q.log_theta)].tolist()))


def threshold_atom(seq: DegreeSequence, q: WeightQuery) -> float:
    """Mass of the annealed law sitting on theta itself (counted as not exceeding)"""
    log_weights, probs = annealed_law(seq, q.t)
    tol = TIE_TOLERANCE * max(1.0, abs(q.log_theta))
    return float(math.fsum(probs[np.abs(log_weights - q.log_theta) <= tol].tolist()))


def gaussian_tail(lam: float) -> float:
    """Standard normal upper tail (1/sqrt(2 pi)) int_lam^inf exp(-u^2/2) du"""
    return float(0.5 * erfc(lam / math.sqrt(2.0)))


def clt_query(stats: SeqStats, t: int, c: float) -> WeightQuery:
    """theta = exp(-mu t + c sigma sqrt(t)), the threshold whose q_t tends to the tail at c"""
    return WeightQuery.from_log(t, -stats.mu * t + c * math.sqrt(stats.sigma2 * t))


def distance_thresholds(n: int) -> tuple[float, float]:
    """
    (ln^3 n / n, 1 / (n ln^3 n)): the thresholds that sandwich the distance at time t

    Raises:
        InvalidParameter: n < 2, where ln n = 0
    """
    if n < 2:
        raise InvalidParameter(f"Distance thresholds need n >= 2, got {n}")
    cube = math.log(n) ** 3
    return cube / n, 1.0 / (n * cube)


def _window_report(times: np.ndarray, tv_max: np.ndarray, stats: SeqStats) -> WindowReport:
    lambdas = (times - stats.t_star) / stats.w_star
    gaussian = np.array([gaussian_tail(lam) for lam in lambdas])
    gaps = np.abs(tv_max - gaussian)
    return WindowReport(
        times=times,
        lambda_grid=lambdas,
        tv_values=tv_max,
        gaussian_values=gaussian,
        sup_gap=float(gaps.max()),
    )


def _window_indices(profile: WalkProfile, stats: SeqStats, half_width: float) -> np.ndarray:
    if stats.w_star == 0.0:
        logger.warning("sigma^2 = 0: out-degrees are constant, no Gaussian window to compare with")
        raise DegenerateWindow("sigma^2 = 0, the window profile is degenerate")
    grid = window_times(stats, half_width)
    picked = np.flatnonzero(np.isin(profile.times, grid))
    if picked.size == 0:
        raise InvalidParameter("The profile does not reach the cutoff window, increase t_max")
    return picked


def window_profile_check(profile: WalkProfile, stats: SeqStats, half_width: float = 4.0) -> WindowReport:
    """
    Compare tv_max(t) with the Gaussian tail at lambda_t = (t - t*) / w*

    Raises:
        DegenerateWindow: sigma^2 = 0
    """
    picked = _window_indices(profile, stats, half_width)
    return _window_report(profile.times[picked], profile.tv_max[picked], stats)


def window_profile_check_pooled(profiles: Sequence[WalkProfile], stats: SeqStats, half_width: float = 4.0) -> WindowReport:
    """Same comparison after averaging tv_max(t) over several environments"""
    if not profiles:
        raise InvalidParameter("At least one profile is required")
    picked = _window_indices(profiles[0], stats, half_width)
    tv_max = np.mean([p.tv_max[picked] for p in profiles], axis=0)
    return _window_report(profiles[0].times[picked], tv_max, stats)
