"""
Degree sequences and their closed-form statistics

A degree sequence pairs an in-degree d_minus and an out-degree d_plus with
every vertex. Everything the theory predicts at a given size (cutoff
location, window width, the exponential convergence constants) is a
function of the sequence alone and is computed here.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from errors import DegenerateDelta, DegenerateMu, EmptySequence, InputError, SumMismatch, ZeroDegree


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    """
    Validated in/out degree pairs, one per vertex

    Build instances with build_degree_sequence or from_groups; the arrays are
    read-only so a sequence can be shared freely.
    """

    d_minus: np.ndarray  # int32, in-degrees
    d_plus: np.ndarray  # int32, out-degrees
    m: int  # arc count

    @property
    def n(self) -> int:
        return int(self.d_minus.size)

    @property
    def delta(self) -> int:
        """Smallest degree over both coordinates"""
        return int(min(self.d_minus.min(), self.d_plus.min()))

    @property
    def delta_max(self) -> int:
        """Largest degree over both coordinates"""
        return int(max(self.d_minus.max(), self.d_plus.max()))

    @property
    def sparse_ok(self) -> bool:
        return self.delta >= 2

    @cached_property
    def tail_owner(self) -> np.ndarray:
        """Vertex of every tail, tails numbered vertex by vertex"""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.d_plus)

    @cached_property
    def head_owner(self) -> np.ndarray:
        """Vertex of every head, heads numbered vertex by vertex"""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.d_minus)

    @cached_property
    def offsets(self) -> np.ndarray:
        """offsets[i]:offsets[i+1] is the tail range of vertex i"""
        out = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.d_plus, out=out[1:])
        return out

    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.d_minus.tolist(), self.d_plus.tolist()))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DegreeSequence):
            return NotImplemented
        return (
            np.array_equal(self.d_minus, other.d_minus)
            and np.array_equal(self.d_plus, other.d_plus)
        )

    def __hash__(self) -> int:
        return hash((self.d_minus.tobytes(), self.d_plus.tobytes()))

    def __repr__(self) -> str:
        return f"<DegreeSequence(n={self.n}, m={self.m}, delta={self.delta}, Delta={self.delta_max})>"


@dataclass(frozen=True)
class SeqStats:
    """Scalar statistics of a degree sequence (logs in nats, times in steps)"""

    mu: float
    sigma2: float
    rho: float
    gamma: float
    t_star: float
    w_star: float
    delta: int
    delta_max: int


@dataclass(frozen=True)
class WindowCondition:
    """Finite-n reading of the non-degeneracy condition sigma^2 >> (ln ln n)^2 / ln n"""

    lhs: float  # sigma^2 * ln n
    rhs: float  # (ln ln n)^2
    flagged: bool  # lhs < rhs: the Gaussian window is not expected at this n


@dataclass(frozen=True)
class DegreeClasses:
    """
    Vertices grouped by their (d_minus, d_plus) pair

    Branching and population samplers only ever need the class of a vertex,
    never its identity.
    """

    d_minus: np.ndarray
    d_plus: np.ndarray
    counts: np.ndarray  # vertices per class
    n: int
    m: int

    @property
    def size(self) -> int:
        return int(self.counts.size)

    @property
    def uniform_probs(self) -> np.ndarray:
        """Class law of a uniformly chosen vertex"""
        return self.counts / self.n

    @property
    def out_probs(self) -> np.ndarray:
        """Class law of the out-degree distribution (vertex i with probability d_i^+/m)"""
        return self.counts * self.d_plus / self.m

    def out_values(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Size-biased out-degree law

        Returns:
            (values, probs): distinct out-degrees d and P(D = d) = (1/m) sum_i d_i^- 1(d_i^+ = d)
        """
        values = np.unique(self.d_plus)
        mass = np.array([np.sum(self.counts[self.d_plus == d] * self.d_minus[self.d_plus == d]) for d in values])
        return values, mass / self.m


def build_degree_sequence(entries: Iterable[Sequence[int]]) -> DegreeSequence:
    """
    Validate (d_minus, d_plus) pairs and build a DegreeSequence

    Args:
        entries: One (d_minus, d_plus) pair per vertex

    Returns:
        DegreeSequence: Sequence with n, m and sparse_ok populated

    Raises:
        EmptySequence: no vertices
        ZeroDegree: some degree below 1
        SumMismatch: in-degrees and out-degrees do not add up to the same m
    """
    pairs = np.asarray(list(entries), dtype=np.int64)
    if pairs.size == 0:
        raise EmptySequence("Degree sequence must contain at least one vertex")
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise InputError("Every entry must be a (d_minus, d_plus) pair")
    if pairs.min() < 1:
        bad = int(np.argmax((pairs < 1).any(axis=1)))
        raise ZeroDegree(f"Vertex {bad} has a degree below 1: {tuple(pairs[bad].tolist())}")

    in_sum = int(pairs[:, 0].sum())
    out_sum = int(pairs[:, 1].sum())
    if in_sum != out_sum:
        raise SumMismatch(f"Sum of in-degrees ({in_sum}) differs from sum of out-degrees ({out_sum})")

    d_minus = pairs[:, 0].astype(np.int32)
    d_plus = pairs[:, 1].astype(np.int32)
    d_minus.flags.writeable = False
    d_plus.flags.writeable = False
    return DegreeSequence(d_minus=d_minus, d_plus=d_plus, m=in_sum)


def from_groups(groups: Iterable[Sequence[int]]) -> DegreeSequence:
    """
    Expand the compact [count, d_minus, d_plus] syntax into a sequence

    Example: [[5000, 2, 3], [5000, 4, 3], [5000, 4, 4]] gives the 15000-vertex
    mixture with out-degrees 3, 3, 4 and in-degrees 2, 4, 4.
    """
    entries = []
    for count, d_minus, d_plus in groups:
        entries.extend([(d_minus, d_plus)] * int(count))
    return build_degree_sequence(entries)


def compute_stats(seq: DegreeSequence) -> SeqStats:
    """
    Closed-form statistics of a degree sequence

    mu and sigma2 are the mean and variance of ln d^+ at the end-point of a
    uniformly chosen head; rho and gamma drive the exponential convergence
    from the in-degree distribution. Sums are accumulated with math.fsum so
    the result does not depend on summation order.

    Raises:
        DegenerateMu: every out-degree is 1, so t_star is undefined
    """
    d_minus = seq.d_minus.astype(np.float64)
    d_plus = seq.d_plus.astype(np.float64)
    log_out = np.log(d_plus)
    m = float(seq.m)

    mu = math.fsum((d_minus * log_out).tolist()) / m
    if mu == 0.0:
        raise DegenerateMu("All out-degrees equal 1: mu = 0 and t_star is undefined")
    sigma2 = math.fsum((d_minus * (log_out - mu) ** 2).tolist()) / m
    rho = math.fsum((d_minus / d_plus).tolist()) / m
    gamma = math.fsum((d_minus ** 2 / d_plus).tolist()) / m

    log_n = math.log(seq.n)
    t_star = log_n / mu
    w_star = math.sqrt(sigma2) * math.sqrt(log_n) / mu ** 1.5

    stats = SeqStats(
        mu=mu,
        sigma2=sigma2,
        rho=rho,
        gamma=gamma,
        t_star=t_star,
        w_star=w_star,
        delta=seq.delta,
        delta_max=seq.delta_max,
    )
    assert stats.gamma >= 1.0 - 1e-12, f"gamma = {stats.gamma} < 1"
    assert stats.rho <= 1.0 / stats.delta + 1e-12, f"rho = {stats.rho} > 1/delta"
    return stats


def window_condition(seq: DegreeSequence, stats: SeqStats) -> WindowCondition:
    """Report both sides of sigma^2 ln n vs (ln ln n)^2; informational only"""
    log_n = math.log(seq.n)
    if log_n <= 0.0:
        return WindowCondition(lhs=0.0, rhs=math.inf, flagged=True)
    lhs = stats.sigma2 * log_n
    rhs = math.log(log_n) ** 2
    return WindowCondition(lhs=lhs, rhs=rhs, flagged=lhs < rhs)


def proxy_horizon(seq: DegreeSequence) -> int:
    """
    h = floor(ln n / (10 ln Delta)), the radius used for tree-like balls and the proxy pi_h

    Raises:
        DegenerateDelta: Delta < 2, the chain is a permutation
    """
    if seq.delta_max < 2:
        raise DegenerateDelta("Delta < 2: every degree is 1 and the walk is a permutation")
    return int(math.floor(math.log(seq.n) / (10.0 * math.log(seq.delta_max))))


def degree_classes(seq: DegreeSequence) -> DegreeClasses:
    pairs, counts = np.unique(np.stack([seq.d_minus, seq.d_plus], axis=1), axis=0, return_counts=True)
    return DegreeClasses(
        d_minus=pairs[:, 0].astype(np.int64),
        d_plus=pairs[:, 1].astype(np.int64),
        counts=counts.astype(np.int64),
        n=seq.n,
        m=seq.m,
    )


def mixture_groups(n: int) -> list[list[int]]:
    """
    The three-class mixture with (d_minus, d_plus) = (2, 3), (4, 3), (4, 4) at total size n

    The first two classes must have equal counts for the degree sums to match.
    """
    k = round(n / 3)
    return [[k, 2, 3], [k, 4, 3], [n - 2 * k, 4, 4]]


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All vectors of parts non-negative integers summing to total, in lexicographic order"""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in compositions(total - head, parts - 1):
            yield (head,) + tail
