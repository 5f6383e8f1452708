"""
Brute-force references for small environments

Nothing here is fast: these are independent computations that the fast
routines in walk and paths are checked against.
"""

import itertools
import math

import numpy as np

from degrees import DegreeSequence, build_degree_sequence, degree_classes
from errors import StateSpaceTooLarge
from graphmodel import Environment
from provenance import SeedLike, make_rng


def random_small_sequence(seed: SeedLike, max_n: int = 6, max_m: int = 12) -> DegreeSequence:
    """
    A random valid degree sequence with 1 <= n <= max_n and n <= m <= max_m

    Both degree vectors are independent uniform compositions of m into n
    positive parts.
    """
    rng = make_rng(seed)
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(n, max(n, max_m) + 1))

    def positive_composition() -> list[int]:
        cuts = np.sort(rng.choice(np.arange(1, m), size=n - 1, replace=False)) if n > 1 else np.array([], dtype=np.int64)
        edges = np.concatenate([[0], cuts, [m]])
        return np.diff(edges).tolist()

    d_minus = positive_composition()
    d_plus = positive_composition()
    return build_degree_sequence(zip(d_minus, d_plus))


def _paths(env: Environment, i: int, t: int):
    """Every tail sequence of length t from i, as (end vertex, weight)"""
    seq = env.seq
    frontier = [(i, 1.0)]
    for _ in range(t):
        nxt = []
        for v, w in frontier:
            out = int(seq.d_plus[v])
            for e in range(seq.offsets[v], seq.offsets[v + 1]):
                nxt.append((int(env.heads[e]), w / out))
        frontier = nxt
    return frontier


def path_sum_distribution(env: Environment, i: int, t: int) -> np.ndarray:
    """P^t(i, j) = sum of w(p) over paths p from i to j"""
    probs = np.zeros(env.n)
    for end, weight in _paths(env, i, t):
        probs[end] += weight
    return probs


def path_weight_tail(env: Environment, i: int, t: int, theta: float) -> float:
    """sum of w(p) 1(w(p) > theta) over every path of length t from i"""
    weights = [w for _, w in _paths(env, i, t)]
    return math.fsum(w for w in weights if w > theta * (1.0 + 1e-12))


def dense_stationary(env: Environment) -> np.ndarray:
    """
    Solve pi (P - I) = 0 with sum(pi) = 1 by dense elimination

    The last balance equation is redundant and is replaced by the
    normalisation, which makes the system regular for an irreducible chain.
    """
    P = env.transition.toarray()
    A = (P - np.eye(env.n)).T
    A[-1, :] = 1.0
    b = np.zeros(env.n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def all_environments(seq: DegreeSequence):
    """Every tail-to-head bijection of a tiny sequence (m! of them)"""
    for perm in itertools.permutations(range(seq.m)):
        yield Environment.from_heads(seq, seq.head_owner[list(perm)])


def _merge_atoms(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys, inverse = np.unique(np.round(values, 12), return_inverse=True)
    return keys, np.bincount(inverse.ravel(), weights=probs, minlength=keys.size)


def rde_exact_law(seq: DegreeSequence, depth: int, max_atoms: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """
    Exact law of Z after depth sweeps from the constant 1

    Each sweep mixes, over marks J drawn by out-degree weight, the d_J^-
    fold convolution of the previous law scaled by 1 / d_J^+.

    Returns:
        (values, probs), sorted by value

    Raises:
        StateSpaceTooLarge: an intermediate law has more than max_atoms atoms
    """
    classes = degree_classes(seq)
    values, probs = np.ones(1), np.ones(1)
    for _ in range(depth):
        parts_v, parts_p = [], []
        for d_minus, d_plus, weight in zip(classes.d_minus, classes.d_plus, classes.out_probs):
            sum_v, sum_p = values, probs
            for _ in range(int(d_minus) - 1):
                sum_v, sum_p = _merge_atoms(np.add.outer(sum_v, values).ravel(), np.multiply.outer(sum_p, probs).ravel())
                if sum_v.size > max_atoms:
                    raise StateSpaceTooLarge(f"{sum_v.size} atoms exceed the limit of {max_atoms}")
            parts_v.append(sum_v / d_plus)
            parts_p.append(weight * sum_p)
        values, probs = _merge_atoms(np.concatenate(parts_v), np.concatenate(parts_p))
    return values, probs
