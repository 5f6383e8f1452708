"""
Limit objects of the equilibrium measure

Three ways of looking at the law of n * pi*(I) for a uniform vertex I:

* the weighted Galton-Watson tree whose generation sums M_t form a mean-one
  martingale converging to M*,
* population dynamics for the fixed point Z = (1/d_J^+) sum_{k <= d_J^-} Z_k,
  from which M* = (n/m) sum_{k <= d_I^-} Z_k is assembled,
* the empirical weights {n pi*(i)} of a sampled environment,

compared with each other through the Wasserstein-1 distance.

Tree nodes carry a mark (a vertex class). The root mark is uniform on V;
a node of mark i has d_i^- children whose marks are i.i.d. from the
out-degree law (class c with probability count_c d_c^+ / m). A node x at
depth t weighs (n d^-_{i(x)} / m) prod 1/d^+ over the t marks on the way
down to it, root excluded.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Literal

import numpy as np
from scipy.stats import wasserstein_distance

from degrees import DegreeClasses, DegreeSequence, compositions, compute_stats, degree_classes
from errors import ExplosionGuard, InvalidParameter, PoolLabelMismatch, RhoOne
from graphmodel import Environment
from provenance import SeedLike, make_rng, seed_record
from walk import Distribution, advance

logger = logging.getLogger(__name__)

PoolLabel = Literal["Z", "M_star", "M_t", "n_pi_star", "n_pi_t"]
MartingaleMethod = Literal["grouped", "explicit"]

DEFAULT_NODE_BUDGET = 10 ** 8
# Smallest pool the population dynamics accepts
MIN_POOL_SIZE = 1000


@dataclass(frozen=True, eq=False)
class SamplePool:
    """Non-negative samples representing one law (Z, M*, M_t or graph weights)"""

    values: np.ndarray
    label: PoolLabel
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.values.size == 0:
            raise InvalidParameter("A sample pool must not be empty")
        if self.values.min() < 0.0:
            raise InvalidParameter("Pool values must be non-negative")

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def std_error(self) -> float:
        if self.size < 2:
            return math.inf
        return float(self.values.std(ddof=1) / math.sqrt(self.size))

    @property
    def second_moment(self) -> float:
        return float(np.mean(self.values ** 2))


def _seed_token(seed: SeedLike) -> str:
    record = seed_record(seed)
    return record.to_token() if record else "none"


# Martingale on the weighted tree


class _CellIndex:
    """
    Numbering of the (class, exponent vector) cells of one generation

    The exponent vector counts, per distinct out-degree value, the marks of
    that value below the root; all nodes in a cell share one weight.
    """

    def __init__(self, classes: DegreeClasses, values: np.ndarray, generation: int):
        self.keys: list[tuple[int, tuple[int, ...]]] = []
        parts = values.size
        for c in range(classes.size):
            for exps in compositions(generation, parts):
                self.keys.append((c, exps))
        self.position = {key: k for k, key in enumerate(self.keys)}

    def __len__(self) -> int:
        return len(self.keys)


def _grouped_cells(classes: DegreeClasses, values: np.ndarray, t_max: int) -> int:
    return classes.size * math.comb(t_max + values.size - 1, values.size - 1)


def _grow_grouped(seq: DegreeSequence, t_max: int, n_trees: int, rng: np.random.Generator):
    """
    Simulate all trees at once, counting nodes per cell

    Children of the N nodes in a cell of class c form N d_c^- independent
    marks, so their class counts are one multinomial draw per tree.

    Returns:
        (martingale, bracket): arrays of shape (t_max + 1, n_trees)
    """
    classes = degree_classes(seq)
    values = np.unique(classes.d_plus)
    level = np.searchsorted(values, classes.d_plus)
    out_probs = classes.out_probs
    gamma = compute_stats(seq).gamma
    n, m = seq.n, seq.m

    martingale = np.empty((t_max + 1, n_trees))
    bracket = np.empty((t_max + 1, n_trees))

    index = _CellIndex(classes, values, 0)
    counts = rng.multinomial(1, classes.uniform_probs, size=n_trees).T.astype(np.int64)
    for t in range(t_max + 1):
        num = np.empty(len(index), dtype=np.int64)
        den = np.empty(len(index), dtype=np.int64)
        for k, (c, exps) in enumerate(index.keys):
            num[k] = n * int(classes.d_minus[c])
            den[k] = m * math.prod(int(v) ** e for v, e in zip(values, exps))
        # exact integer numerators keep telescoping weights exact
        martingale[t] = ((counts * num[:, None]) / den[:, None]).sum(axis=0)
        sq = (num.astype(np.float64) / den) ** 2 / classes.d_minus[[c for c, _ in index.keys]]
        bracket[t] = (gamma - 1.0) * (counts * sq[:, None]).sum(axis=0)
        if t == t_max:
            break

        child_index = _CellIndex(classes, values, t + 1)
        child_counts = np.zeros((len(child_index), n_trees), dtype=np.int64)
        for k, (c, exps) in enumerate(index.keys):
            parents = counts[k]
            if not parents.any():
                continue
            drawn = rng.multinomial(parents * int(classes.d_minus[c]), out_probs)
            for c_child in range(classes.size):
                lv = level[c_child]
                key = (c_child, exps[:lv] + (exps[lv] + 1,) + exps[lv + 1:])
                child_counts[child_index.position[key]] += drawn[:, c_child]
        index, counts = child_index, child_counts
    return martingale, bracket


def _grow_explicit(seq: DegreeSequence, t_max: int, n_trees: int, rng: np.random.Generator):
    """Node-by-node simulation, every tree node held in flat arrays"""
    classes = degree_classes(seq)
    out_probs = classes.out_probs
    gamma = compute_stats(seq).gamma
    n, m = seq.n, seq.m

    martingale = np.empty((t_max + 1, n_trees))
    bracket = np.empty((t_max + 1, n_trees))

    tree = np.arange(n_trees)
    mark = rng.choice(classes.size, size=n_trees, p=classes.uniform_probs)
    den = np.ones(n_trees, dtype=np.int64)
    for t in range(t_max + 1):
        d_minus = classes.d_minus[mark]
        weight = (n * d_minus) / (m * den)
        martingale[t] = np.bincount(tree, weights=weight, minlength=n_trees)
        bracket[t] = (gamma - 1.0) * np.bincount(tree, weights=weight ** 2 / d_minus, minlength=n_trees)
        if t == t_max:
            break
        tree = np.repeat(tree, d_minus)
        den = np.repeat(den, d_minus)
        mark = rng.choice(classes.size, size=tree.size, p=out_probs)
        den = den * classes.d_plus[mark]
    return martingale, bracket


def _check_budget(seq: DegreeSequence, t_max: int, n_trees: int, node_budget: float, method: MartingaleMethod):
    classes = degree_classes(seq)
    if method == "grouped":
        tracked = n_trees * _grouped_cells(classes, np.unique(classes.d_plus), t_max)
    else:
        mean_offspring = float(np.sum(classes.out_probs * classes.d_minus))
        tracked = mean_offspring ** t_max * n_trees
    if tracked > node_budget:
        raise ExplosionGuard(f"{method} simulation would track {tracked:.3g} items, budget is {node_budget:.3g}")


def _grow(seq, t_max, n_trees, seed, node_budget, method):
    if t_max < 0:
        raise InvalidParameter(f"t_max must be non-negative, got {t_max}")
    if n_trees < 1:
        raise InvalidParameter(f"n_trees must be at least 1, got {n_trees}")
    _check_budget(seq, t_max, n_trees, node_budget, method)
    rng = make_rng(seed)
    if method == "grouped":
        return _grow_grouped(seq, t_max, n_trees, rng)
    return _grow_explicit(seq, t_max, n_trees, rng)


def simulate_martingale(
    seq: DegreeSequence,
    t_max: int,
    n_trees: int,
    seed: SeedLike,
    node_budget: float = DEFAULT_NODE_BUDGET,
    method: MartingaleMethod = "grouped",
) -> list[SamplePool]:
    """
    Generation sums M_0, ..., M_t_max of independent weighted trees

    Args:
        seq: Degree sequence supplying the marks
        t_max: Last generation
        n_trees: Number of independent trees
        seed: Stream handle
        node_budget: Cap on tracked items (cells for "grouped", nodes for "explicit")
        method: "grouped" counts nodes per (class, weight) cell with
            multinomial draws; "explicit" keeps every node. Both have the
            same law.

    Returns:
        One SamplePool labelled M_t per generation

    Raises:
        ExplosionGuard: tracked items would exceed node_budget
    """
    martingale, _ = _grow(seq, t_max, n_trees, seed, node_budget, method)
    token = _seed_token(seed)
    return [
        SamplePool(values=martingale[t], label="M_t", meta={"generation": t, "seed": token, "method": method})
        for t in range(t_max + 1)
    ]


def martingale_bracket(
    seq: DegreeSequence,
    t_max: int,
    n_trees: int,
    seed: SeedLike,
    node_budget: float = DEFAULT_NODE_BUDGET,
    method: MartingaleMethod = "grouped",
) -> np.ndarray:
    """
    Conditional variances Sigma_t = (gamma - 1) sum_x w(x)^2 / d^-_{i(x)}

    Computed on the same trees simulate_martingale grows for this seed.

    Returns:
        Array of shape (t_max + 1, n_trees)
    """
    _, bracket = _grow(seq, t_max, n_trees, seed, node_budget, method)
    return bracket


# Population dynamics


def _rde_sweep(pool: np.ndarray, classes: DegreeClasses, rng: np.random.Generator) -> np.ndarray:
    size = pool.size
    mark = rng.choice(classes.size, size=size, p=classes.out_probs)
    d_minus = classes.d_minus[mark]
    picks = pool[rng.integers(0, size, size=int(d_minus.sum()))]
    owner = np.repeat(np.arange(size), d_minus)
    sums = np.bincount(owner, weights=picks, minlength=size)
    return sums / classes.d_plus[mark]


def iterate_rde(
    seq: DegreeSequence, pool_size: int, iterations: int, seed: SeedLike, normalize: bool = True
) -> Iterator[SamplePool]:
    """
    Population dynamics for Z, yielding the pool after every sweep

    The pool starts at the constant 1. A sweep rebuilds every slot from a
    fresh mark J and d_J^- uniform picks of the previous pool. The fixed
    point equation is scale invariant, so with normalize the pool is
    rescaled to mean one after each sweep; the mean and standard error
    before rescaling are kept in meta as raw_mean and raw_std_error, and
    w1_step is the W1 distance to the previous pool.

    Raises:
        InvalidParameter: pool_size below MIN_POOL_SIZE or iterations < 1
    """
    if pool_size < MIN_POOL_SIZE:
        raise InvalidParameter(f"pool_size must be at least {MIN_POOL_SIZE}, got {pool_size}")
    if iterations < 1:
        raise InvalidParameter(f"iterations must be at least 1, got {iterations}")
    rng = make_rng(seed)
    classes = degree_classes(seq)
    token = _seed_token(seed)

    previous = SamplePool(values=np.ones(pool_size), label="Z")
    for iteration in range(1, iterations + 1):
        pool = _rde_sweep(previous.values, classes, rng)
        raw = SamplePool(values=pool, label="Z")
        if normalize:
            pool = pool / raw.mean
        meta = {"iterations": iteration, "seed": token, "raw_mean": raw.mean, "raw_std_error": raw.std_error}
        current = SamplePool(values=pool, label="Z", meta=meta)
        meta["w1_step"] = wasserstein1(previous, current)
        logger.debug("Sweep %d: W1 to the previous pool %.6f", iteration, meta["w1_step"])
        yield current
        previous = current


def rde_w1_trace(pools: Iterable[SamplePool]) -> np.ndarray:
    """W1(pool_{k-1}, pool_k) for k = 1, 2, ... as recorded by iterate_rde"""
    return np.array([pool.meta["w1_step"] for pool in pools])


def sample_rde(
    seq: DegreeSequence, pool_size: int, iterations: int, seed: SeedLike, normalize: bool = True
) -> SamplePool:
    """Final pool of iterate_rde"""
    pool = None
    for pool in iterate_rde(seq, pool_size, iterations, seed, normalize):
        pass
    return pool


def rde_second_moment(seq: DegreeSequence, depth: int) -> tuple[float, float]:
    """
    E[Z^2] after depth sweeps from the constant 1, and its fixed point

    s_0 = 1, s_{k+1} = rho s_k + gamma - rho, fixed point (gamma - rho) / (1 - rho).

    Raises:
        RhoOne: rho >= 1
    """
    stats = compute_stats(seq)
    if stats.rho >= 1.0:
        raise RhoOne(f"rho = {stats.rho} >= 1, the recursion has no finite fixed point")
    s = 1.0
    for _ in range(depth):
        s = stats.rho * s + stats.gamma - stats.rho
    return s, (stats.gamma - stats.rho) / (1.0 - stats.rho)


def m_star_second_moment(seq: DegreeSequence) -> float:
    """E[M*^2] = 1 + (n/m)^2 Var(d_I^-) + n (gamma - 1) / (m (1 - rho))"""
    stats = compute_stats(seq)
    if stats.rho >= 1.0:
        raise RhoOne(f"rho = {stats.rho} >= 1")
    ratio = seq.n / seq.m
    d_minus = seq.d_minus.astype(np.float64)
    variance = math.fsum((d_minus ** 2).tolist()) / seq.n - (seq.m / seq.n) ** 2
    return 1.0 + ratio ** 2 * variance + ratio * (stats.gamma - 1.0) / (1.0 - stats.rho)


def sample_m_star(seq: DegreeSequence, z_pool: SamplePool, n_samples: int, seed: SeedLike) -> SamplePool:
    """
    M* = (n/m) sum_{k <= d_I^-} Z_k with I uniform and Z_k picked from z_pool

    Raises:
        PoolLabelMismatch: z_pool is not a Z pool
    """
    if z_pool.label != "Z":
        raise PoolLabelMismatch(f"Expected a Z pool, got {z_pool.label}")
    if n_samples < 1:
        raise InvalidParameter(f"n_samples must be at least 1, got {n_samples}")
    rng = make_rng(seed)
    vertex = rng.integers(0, seq.n, size=n_samples)
    d_minus = seq.d_minus[vertex].astype(np.int64)
    picks = z_pool.values[rng.integers(0, z_pool.size, size=int(d_minus.sum()))]
    owner = np.repeat(np.arange(n_samples), d_minus)
    sums = np.bincount(owner, weights=picks, minlength=n_samples)
    values = seq.n * sums / seq.m
    meta = {"seed": _seed_token(seed), "iterations": z_pool.meta.get("iterations")}
    return SamplePool(values=values, label="M_star", meta=meta)


# Comparisons


def wasserstein1(a: SamplePool, b: SamplePool) -> float:
    """
    W1 between two empirical laws on the line

    Integrates |F_a - F_b| exactly, which equals the quantile coupling
    integral even for pools of different sizes.
    """
    return float(wasserstein_distance(a.values, b.values))


def equilibrium_weight_pool(env: Environment, pi_star: Distribution) -> SamplePool:
    """{n pi*(i) : i in V}"""
    token = env.seed.to_token() if env.seed else "none"
    return SamplePool(values=env.n * pi_star.probs, label="n_pi_star", meta={"seed": token})


def walk_weight_pool(env: Environment, t: int) -> SamplePool:
    """{n pi_t(i) : i in V}, the graph-side counterpart of M_t"""
    pi_t = advance(env, Distribution.in_degree(env), t)
    token = env.seed.to_token() if env.seed else "none"
    return SamplePool(values=env.n * pi_t.probs, label="n_pi_t", meta={"generation": t, "seed": token})


def pool_histogram(pool: SamplePool, bin_width: float = 0.02) -> tuple[np.ndarray, np.ndarray]:
    """
    Counts on bins [k w, (k+1) w) covering [0, max]

    Returns:
        (edges, counts) with len(edges) == len(counts) + 1
    """
    if bin_width <= 0.0:
        raise InvalidParameter(f"bin_width must be positive, got {bin_width}")
    n_bins = max(1, math.floor(pool.values.max() / bin_width) + 1)
    edges = np.arange(n_bins + 1) * bin_width
    counts, _ = np.histogram(pool.values, bins=edges)
    return edges, counts
