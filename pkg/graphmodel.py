"""
Configuration-model environments

An environment is a uniform bijection between the m tails (out-stubs) and
the m heads (in-stubs) of a degree sequence. It is generated sequentially:
tails are served in vertex-then-tail order and each one is matched to a head
drawn uniformly among the unmatched ones. Loops and multiple arcs are kept.

This module also answers structural questions about an environment: strong
connectivity, forward/backward balls, the tree-like vertex set V* and how
fast the walk escapes from its complement.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from degrees import DegreeSequence, proxy_horizon
from errors import FileFormatError, KOutOfRange, ResampleCapExceeded
from provenance import STREAM_ENVIRONMENT, SeedLike, SeedRecord, make_rng, seed_record, task_stream

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward"]


@dataclass(frozen=True, eq=False)
class Environment:
    """
    A realized tail-to-head bijection

    heads[e] is the vertex owning the head matched to tail e, tails numbered
    vertex by vertex (so heads[offsets[i]:offsets[i+1]] lists the
    out-neighbours of i in tail order).
    """

    seq: DegreeSequence
    heads: np.ndarray
    seed: SeedRecord | None = None

    @classmethod
    def from_heads(cls, seq: DegreeSequence, heads, seed: SeedRecord | None = None) -> "Environment":
        """
        Wrap an explicit list of head owners, checking degree conservation

        Raises:
            FileFormatError: wrong length or in-multiplicities not matching d_minus
        """
        heads = np.array(heads, dtype=np.int64)
        if heads.shape != (seq.m,):
            raise FileFormatError(f"Expected {seq.m} arcs, got {heads.size}")
        if heads.size and (heads.min() < 0 or heads.max() >= seq.n):
            raise FileFormatError("Arc endpoint outside the vertex range")
        incoming = np.bincount(heads, minlength=seq.n)
        if not np.array_equal(incoming, seq.d_minus):
            raise FileFormatError("Incoming multiplicities do not match the in-degrees")
        heads.flags.writeable = False
        return cls(seq=seq, heads=heads, seed=seed)

    @property
    def n(self) -> int:
        return self.seq.n

    @property
    def m(self) -> int:
        return self.seq.m

    def out_neighbors(self, i: int) -> np.ndarray:
        offsets = self.seq.offsets
        return self.heads[offsets[i]:offsets[i + 1]]

    @cached_property
    def transition(self) -> csr_matrix:
        """P(i, j) = card{tails of i matched to heads of j} / d_i^+ (multi-arcs merged)"""
        tails = self.seq.tail_owner
        weights = 1.0 / self.seq.d_plus[tails]
        return csr_matrix((weights, (tails, self.heads)), shape=(self.n, self.n))

    @cached_property
    def transition_T(self) -> csr_matrix:
        """Transpose of P in CSR form: distributions evolve as transition_T @ probs"""
        return self.transition.T.tocsr()

    @cached_property
    def adjacency(self) -> csr_matrix:
        tails = self.seq.tail_owner
        return csr_matrix((np.ones(self.m), (tails, self.heads)), shape=(self.n, self.n))

    @cached_property
    def in_offsets(self) -> np.ndarray:
        out = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.seq.d_minus, out=out[1:])
        return out

    @cached_property
    def in_sources(self) -> np.ndarray:
        """Tail owners of the arcs entering each vertex, grouped by head vertex"""
        order = np.argsort(self.heads, kind="stable")
        return self.seq.tail_owner[order]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return self.seq == other.seq and np.array_equal(self.heads, other.heads) and self.seed == other.seed

    __hash__ = object.__hash__

    def __repr__(self) -> str:
        token = self.seed.to_token() if self.seed else "none"
        return f"<Environment(n={self.n}, m={self.m}, seed={token})>"


@dataclass(frozen=True, eq=False)
class PartialEnvironment:
    """The first k arcs of a sequential matching"""

    seq: DegreeSequence
    head_slots: np.ndarray  # index of the head stub matched to tails 0..k-1
    heads: np.ndarray  # vertex owning that head
    seed: SeedRecord | None = None

    @property
    def k(self) -> int:
        return int(self.heads.size)

    def complete(self) -> Environment:
        if self.k != self.seq.m:
            raise KOutOfRange(f"Only {self.k} of {self.seq.m} arcs are matched")
        return Environment.from_heads(self.seq, self.heads, self.seed)


@dataclass(frozen=True, eq=False)
class CollisionTrace:
    """Collision flags of the first k matching steps"""

    k: int
    collisions: int
    per_step_flags: np.ndarray  # bool, length k


@dataclass(frozen=True)
class BallReport:
    center: int
    radius: int
    direction: Direction
    vertex_count: int
    arc_count: int
    extra_arcs: int

    @property
    def is_tree(self) -> bool:
        return self.extra_arcs == 0


@dataclass(frozen=True)
class EscapeProfile:
    """max_i P^l(i, V minus V*) against the tree-like bound 2^-(l min h)"""

    horizon: int
    ell: np.ndarray
    measured: np.ndarray
    bound: np.ndarray


def _sequential_matching(seq: DegreeSequence, k: int, rng: np.random.Generator, track: bool):
    """
    Match tails 0..k-1 to uniformly drawn unmatched heads

    Unmatched heads live in positions [0, m - j) of a virtual array; the
    drawn position is refilled with the last unmatched head (swap-to-end),
    stored sparsely so that short prefixes cost O(k).

    Returns:
        (head_slots, flags): chosen head indices and per-step collision flags
    """
    m = seq.m
    draws = rng.integers(0, m - np.arange(k, dtype=np.int64))
    moved: dict[int, int] = {}
    slots = np.empty(k, dtype=np.int64)
    flags = np.zeros(k, dtype=bool)
    head_owner = seq.head_owner
    tail_owner = seq.tail_owner
    alive = np.zeros(seq.n, dtype=bool) if track else None

    for j, r in enumerate(draws.tolist()):
        last = m - 1 - j
        slots[j] = moved.get(r, r)
        moved[r] = moved.get(last, last)
        if track:
            # the tail's own vertex is alive before its head is drawn
            alive[tail_owner[j]] = True
            owner = head_owner[slots[j]]
            flags[j] = alive[owner]
            alive[owner] = True
    return slots, flags


def sample_environment(seq: DegreeSequence, seed: SeedLike) -> Environment:
    """
    Draw a uniform environment

    Args:
        seq: Degree sequence
        seed: int, SeedSequence or Generator

    Returns:
        Environment: uniformly distributed over the m! tail-to-head bijections
    """
    rng = make_rng(seed)
    slots, _ = _sequential_matching(seq, seq.m, rng, track=False)
    return Environment.from_heads(seq, seq.head_owner[slots], seed_record(seed))


def sample_with_collision_trace(seq: DegreeSequence, seed: SeedLike, k: int) -> tuple[PartialEnvironment, CollisionTrace]:
    """
    Form the first k arcs and flag every collision

    A step collides when the drawn head belongs to a vertex that was already
    alive, i.e. one of its tails or heads had been chosen before.

    Raises:
        KOutOfRange: k outside [1, m]
    """
    if not 1 <= k <= seq.m:
        raise KOutOfRange(f"k must lie in [1, {seq.m}], got {k}")
    rng = make_rng(seed)
    slots, flags = _sequential_matching(seq, k, rng, track=True)
    partial = PartialEnvironment(seq=seq, head_slots=slots, heads=seq.head_owner[slots], seed=seed_record(seed))
    trace = CollisionTrace(k=k, collisions=int(flags.sum()), per_step_flags=flags)
    return partial, trace


def collision_bound(seq: DegreeSequence, k: int) -> float:
    """Mean of the dominating Binomial(k, 2 Delta k / (m - k + 1)): 2 Delta k^2 / (m - k + 1)"""
    return 2.0 * seq.delta_max * k * k / (seq.m - k + 1)


def strongly_connected(env: Environment) -> bool:
    """True iff a single strongly connected component covers every vertex"""
    count, _ = connected_components(env.adjacency, directed=True, connection="strong")
    return count == 1


def sample_connected_environment(
    seq: DegreeSequence, seed: int, index: int = 0, cap: int = 100
) -> tuple[Environment, int]:
    """
    Experiment-level policy: resample until strongly connected

    Attempt a of environment `index` uses stream (seed, ENVIRONMENT, index, a),
    so every rejection is reproducible and visible to the caller.

    Returns:
        (environment, rejections)

    Raises:
        ResampleCapExceeded: no strongly connected sample within cap attempts
    """
    for attempt in range(cap):
        env = sample_environment(seq, task_stream(seed, STREAM_ENVIRONMENT, index, attempt))
        if strongly_connected(env):
            return env, attempt
        logger.warning("Environment %d attempt %d is not strongly connected, resampling", index, attempt)
    raise ResampleCapExceeded(f"No strongly connected environment after {cap} attempts (index {index})")


def ball(env: Environment, center: int, radius: int, direction: Direction = "forward") -> BallReport:
    """
    Breadth-first ball of a given radius around a vertex

    Arcs leaving every vertex at distance < radius are counted (entering
    arcs for the backward ball). A ball is a directed tree iff it holds
    exactly vertex_count - 1 arcs.
    """
    if radius < 0:
        raise KOutOfRange(f"radius must be non-negative, got {radius}")
    if direction == "forward":
        offsets, targets = env.seq.offsets, env.heads
    else:
        offsets, targets = env.in_offsets, env.in_sources

    seen = {center}
    frontier = [center]
    arc_count = 0
    for _ in range(radius):
        next_frontier = []
        for v in frontier:
            for w in targets[offsets[v]:offsets[v + 1]].tolist():
                arc_count += 1
                if w not in seen:
                    seen.add(w)
                    next_frontier.append(w)
        frontier = next_frontier
        if not frontier:
            break

    vertex_count = len(seen)
    return BallReport(
        center=center,
        radius=radius,
        direction=direction,
        vertex_count=vertex_count,
        arc_count=arc_count,
        extra_arcs=arc_count - (vertex_count - 1),
    )


def v_star(env: Environment, radius: int | None = None) -> frozenset[int]:
    """
    Vertices whose forward ball is a directed tree

    Args:
        env: Environment
        radius: Ball radius, defaults to h = floor(ln n / (10 ln Delta))
    """
    h = proxy_horizon(env.seq) if radius is None else radius
    return frozenset(i for i in range(env.n) if ball(env, i, h, "forward").is_tree)


def escape_profile(env: Environment, ell_max: int, radius: int | None = None) -> EscapeProfile:
    """
    Worst-case probability of standing outside V* after l steps

    Evolves the indicator of V minus V* under P acting on functions, so the
    whole profile costs O(m * ell_max).
    """
    h = proxy_horizon(env.seq) if radius is None else radius
    inside = v_star(env, h)
    f = np.ones(env.n)
    f[list(inside)] = 0.0

    measured = np.empty(ell_max + 1)
    for ell in range(ell_max + 1):
        measured[ell] = f.max()
        f = env.transition @ f
    ell = np.arange(ell_max + 1)
    bound = 2.0 ** -np.minimum(ell, h)
    return EscapeProfile(horizon=h, ell=ell, measured=measured, bound=bound)

