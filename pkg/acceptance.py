"""
Acceptance suite

Ten fixed-seed criteria combining exact oracles with finite-n statistical
checks of the cutoff, window, equilibrium and limit-law predictions, plus
informational measurements that are reported but never fail a run.

Every random draw comes from a stream keyed by (criterion, task index), so
the report is the same for any number of worker processes.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable

import numpy as np

from degrees import DegreeSequence, build_degree_sequence, compute_stats, from_groups, mixture_groups
from errors import ResampleCapExceeded
from graphmodel import (
    collision_bound,
    sample_connected_environment,
    sample_environment,
    sample_with_collision_trace,
    strongly_connected,
)
from limits import (
    equilibrium_weight_pool,
    iterate_rde,
    m_star_second_moment,
    rde_second_moment,
    sample_m_star,
    sample_rde,
    simulate_martingale,
    wasserstein1,
)
from oracles import dense_stationary, path_sum_distribution, random_small_sequence
from paths import annealed_q, annealed_q_exact, clt_query, gaussian_tail, threshold_atom, window_profile_check_pooled
from provenance import (
    STREAM_ANNEALED,
    STREAM_COLLISIONS,
    STREAM_MSTAR,
    STREAM_ORACLE,
    STREAM_RDE,
    STREAM_STARTS,
    STREAM_TREES,
    task_stream,
)
from schemas import AcceptanceSettings, CriterionResult, VerifyReport
from walk import (
    Distribution,
    WalkProfile,
    advance,
    convergence_bound,
    dist_from_vertex,
    distance_profile,
    equilibrium,
    proxy_equilibrium,
    select_starts,
    tv_distance,
)

logger = logging.getLogger(__name__)

# Oracle sub-streams
_ORACLE_SEQUENCE = 1
_ORACLE_ENVIRONMENT = 2
_EQUILIBRIUM_SEQUENCE = 3
_EQUILIBRIUM_ENVIRONMENT = 4
_BALANCED_SEQUENCE = 5
_BALANCED_ENVIRONMENT = 6


def parallel_map(fn: Callable, tasks: Iterable, jobs: int) -> list:
    """Ordered map, in worker processes when jobs > 1"""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _regular_sequence(d: int, n: int) -> DegreeSequence:
    return build_degree_sequence([(d, d)] * n)


def _se(values: np.ndarray) -> float:
    return float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0


# 1. Path-sum oracle


def criterion_path_oracle(settings: AcceptanceSettings) -> CriterionResult:
    """dist_from_vertex against brute-force path enumeration"""
    worst = 0.0
    for k in range(settings.oracle_envs):
        seq = random_small_sequence(
            task_stream(settings.seed, STREAM_ORACLE, _ORACLE_SEQUENCE, k), settings.oracle_max_n, settings.oracle_max_m
        )
        env = sample_environment(seq, task_stream(settings.seed, STREAM_ORACLE, _ORACLE_ENVIRONMENT, k))
        for i in range(env.n):
            for t in range(settings.oracle_max_t + 1):
                fast = dist_from_vertex(env, i, t).probs
                slow = path_sum_distribution(env, i, t)
                worst = max(worst, float(np.abs(fast - slow).max()))
    return CriterionResult(
        name="path_oracle",
        passed=worst <= settings.oracle_tol,
        measured=worst,
        threshold=settings.oracle_tol,
        detail=f"{settings.oracle_envs} environments, t <= {settings.oracle_max_t}",
    )


# 2. Equilibrium vs dense solve


def _connected_small(settings: AcceptanceSettings, sub_seq: int, sub_env: int, k: int, balanced: bool):
    for attempt in range(settings.resample_cap):
        seq = random_small_sequence(
            task_stream(settings.seed, STREAM_ORACLE, sub_seq, k, attempt),
            settings.equilibrium_max_n,
            settings.equilibrium_max_m,
        )
        if balanced:
            seq = build_degree_sequence(zip(seq.d_minus.tolist(), seq.d_minus.tolist()))
        env = sample_environment(seq, task_stream(settings.seed, STREAM_ORACLE, sub_env, k, attempt))
        if strongly_connected(env):
            return env
    raise ResampleCapExceeded(f"No strongly connected small environment for task {k}")


def criterion_equilibrium(settings: AcceptanceSettings) -> CriterionResult:
    """Power iteration against a dense solve, and pi* = pi_0 when d^+ = d^-"""
    worst_dense = 0.0
    for k in range(settings.equilibrium_envs):
        env = _connected_small(settings, _EQUILIBRIUM_SEQUENCE, _EQUILIBRIUM_ENVIRONMENT, k, balanced=False)
        pi = equilibrium(env).distribution.probs
        worst_dense = max(worst_dense, float(np.abs(pi - dense_stationary(env)).max()))

    worst_balanced = 0.0
    for k in range(max(1, settings.equilibrium_envs // 5)):
        env = _connected_small(settings, _BALANCED_SEQUENCE, _BALANCED_ENVIRONMENT, k, balanced=True)
        pi = equilibrium(env).distribution.probs
        worst_balanced = max(worst_balanced, float(np.abs(pi - env.seq.d_minus / env.m).max()))

    measured = max(worst_dense, worst_balanced)
    return CriterionResult(
        name="equilibrium",
        passed=measured <= settings.equilibrium_tol,
        measured={"dense": worst_dense, "balanced": worst_balanced},
        threshold=settings.equilibrium_tol,
    )


# 3-5. Mixture environments


def _mixture_task(args: tuple[AcceptanceSettings, int]) -> dict[str, Any]:
    """Everything criteria 3-5 need from one sampled environment"""
    settings, k = args
    seq = from_groups(mixture_groups(settings.mixture_n))
    stats = compute_stats(seq)
    env, rejections = sample_connected_environment(seq, settings.seed, index=k, cap=settings.resample_cap)
    result = equilibrium(env)
    pi_star = result.distribution

    # exponential convergence from pi_0
    dist = Distribution.in_degree(env)
    excess = -math.inf
    for t in range(settings.bound_t_max + 1):
        if t:
            dist = advance(env, dist, 1)
        gap = tv_distance(dist, pi_star) - convergence_bound(stats, env.n, env.m, t)
        excess = max(excess, gap)

    # cutoff
    t_early = math.ceil(0.5 * stats.t_star)
    t_late = math.ceil(2.0 * stats.t_star)
    t_max = max(t_late, math.floor(stats.t_star + settings.window_half_width * stats.w_star)) + 1
    starts = select_starts(
        env,
        task_stream(settings.seed, STREAM_STARTS, k),
        policy="sampled",
        sample_size=settings.start_sample,
        n_lowest=settings.start_lowest,
        pi_star=pi_star,
    )
    profile = distance_profile(env, starts, t_max, target="exact", target_dist=pi_star)
    below = np.flatnonzero(profile.tv_mean < 0.5)
    t_half = int(profile.times[below[0]]) if below.size else None

    return {
        "index": k,
        "rejections": rejections,
        "cesaro_fallbacks": result.cesaro_fallbacks,
        "bound_excess": excess,
        "t_half": t_half,
        "tv_early": float(profile.tv_max[t_early]),
        "tv_late": float(profile.tv_max[t_late]),
        "profile": profile,
        "proxy_tv": tv_distance(proxy_equilibrium(env), pi_star),
    }


def mixture_runs(settings: AcceptanceSettings, jobs: int = 1) -> list[dict[str, Any]]:
    return parallel_map(_mixture_task, [(settings, k) for k in range(settings.mixture_seeds)], jobs)


def criterion_convergence_bound(settings: AcceptanceSettings, runs: list[dict[str, Any]]) -> CriterionResult:
    ok = sum(run["bound_excess"] <= settings.bound_slack for run in runs)
    return CriterionResult(
        name="convergence_bound",
        passed=ok >= settings.required_seeds,
        measured={"seeds_ok": ok, "worst_excess": max(run["bound_excess"] for run in runs)},
        threshold={"seeds_ok": settings.required_seeds, "slack": settings.bound_slack},
    )


def criterion_cutoff(settings: AcceptanceSettings, runs: list[dict[str, Any]]) -> CriterionResult:
    seq = from_groups(mixture_groups(settings.mixture_n))
    stats = compute_stats(seq)
    low = stats.t_star - settings.cutoff_width * stats.w_star
    high = stats.t_star + settings.cutoff_width * stats.w_star

    def seed_ok(run) -> bool:
        located = run["t_half"] is not None and low <= run["t_half"] <= high
        return located and run["tv_early"] >= settings.early_tv and run["tv_late"] <= settings.late_tv

    ok = sum(seed_ok(run) for run in runs)
    return CriterionResult(
        name="cutoff_location",
        passed=ok >= settings.required_seeds,
        measured={
            "seeds_ok": ok,
            "t_half": [run["t_half"] for run in runs],
            "min_tv_early": min(run["tv_early"] for run in runs),
            "max_tv_late": max(run["tv_late"] for run in runs),
        },
        threshold={"window": [low, high], "early": settings.early_tv, "late": settings.late_tv},
    )


def criterion_window(settings: AcceptanceSettings, runs: list[dict[str, Any]]) -> CriterionResult:
    seq = from_groups(mixture_groups(settings.mixture_n))
    stats = compute_stats(seq)
    profiles: list[WalkProfile] = [run["profile"] for run in runs]
    report = window_profile_check_pooled(profiles, stats, settings.window_half_width)
    logger.info("Pooled window sup gap %.6f", report.sup_gap)
    return CriterionResult(
        name="gaussian_window",
        passed=report.sup_gap <= settings.window_tol,
        measured=report.sup_gap,
        threshold=settings.window_tol,
        detail=f"{len(profiles)} environments pooled over {report.times.size} window times",
    )


def info_proxy(settings: AcceptanceSettings, runs: list[dict[str, Any]]) -> CriterionResult:
    """Fraction of environments with tv(pi_h, pi*) below proxy_tol (reported only)"""
    fraction = sum(run["proxy_tv"] < settings.proxy_tol for run in runs) / len(runs)
    return CriterionResult(
        name="proxy_validity",
        primary=False,
        passed=fraction >= 0.95,
        measured={"fraction": fraction, "max_tv": max(run["proxy_tv"] for run in runs)},
        threshold=settings.proxy_tol,
    )


# 6. Martingale


def criterion_martingale(settings: AcceptanceSettings) -> CriterionResult:
    seq = from_groups(mixture_groups(settings.mixture_n))
    stats = compute_stats(seq)
    T = settings.martingale_t_max
    pools = simulate_martingale(seq, T, settings.martingale_trees, task_stream(settings.seed, STREAM_TREES))
    band = settings.se_band

    increments_ok = True
    worst_increment = 0.0
    for t in range(T):
        diff = pools[t + 1].values - pools[t].values
        z = abs(diff.mean()) / _se(diff) if _se(diff) > 0 else 0.0
        worst_increment = max(worst_increment, z)
        increments_ok &= abs(diff.mean()) <= band * _se(diff)

    scale = seq.n * (stats.gamma - 1.0) / (seq.m * (1.0 - stats.rho))
    variance_ok = True
    worst_variance = 0.0
    for t in range(T + 1):
        sq = (pools[T].values - pools[t].values) ** 2
        expected = scale * stats.rho ** t * (1.0 - stats.rho ** (T - t))
        se = _se(sq)
        deviation = abs(sq.mean() - expected)
        worst_variance = max(worst_variance, deviation / se if se > 0 else 0.0)
        variance_ok &= deviation <= band * se + 1e-15

    return CriterionResult(
        name="martingale",
        passed=bool(increments_ok and variance_ok),
        measured={"worst_increment_se": worst_increment, "worst_variance_se": worst_variance},
        threshold=band,
        detail=f"{settings.martingale_trees} trees, t_max={T}",
    )


# 7. Population dynamics and W1


def _w1_task(args: tuple[AcceptanceSettings, int, int]) -> float:
    settings, pos, k = args
    seq = from_groups(mixture_groups(settings.w1_sizes[pos]))
    env, _ = sample_connected_environment(seq, settings.seed, index=1000 * (pos + 1) + k, cap=settings.resample_cap)
    graph_pool = equilibrium_weight_pool(env, equilibrium(env).distribution)
    z_pool = sample_rde(seq, settings.rde_pool, settings.rde_iterations, task_stream(settings.seed, STREAM_RDE, pos, k))
    m_pool = sample_m_star(seq, z_pool, settings.m_star_samples, task_stream(settings.seed, STREAM_MSTAR, pos, k))
    return wasserstein1(graph_pool, m_pool)


def criterion_limits(settings: AcceptanceSettings, jobs: int = 1) -> CriterionResult:
    seq = from_groups(mixture_groups(settings.mixture_n))
    band = settings.se_band

    # every sweep from a mean-one pool must stay mean-one before rescaling
    mean_ok = True
    worst = 0.0
    pools = iterate_rde(seq, settings.rde_pool, settings.rde_iterations, task_stream(settings.seed, STREAM_RDE))
    trace = []
    for pool in pools:
        deviation = abs(pool.meta["raw_mean"] - 1.0)
        se = pool.meta["raw_std_error"]
        worst = max(worst, deviation / se if se > 0 else 0.0)
        mean_ok &= deviation <= band * se + 1e-12
        trace.append(pool.meta["w1_step"])

    # successive pools contract until they sit at the sampling floor
    tol = settings.rde_w1_tol
    trace = np.array(trace)
    above = trace >= tol
    settle = int(np.argmin(above)) if not above.all() else trace.size
    contracting = bool(np.all(np.diff(trace[: settle + 1]) <= 0.0))
    settled = bool(trace[-min(5, trace.size):].max() < tol)

    tasks = [(settings, pos, k) for pos in range(len(settings.w1_sizes)) for k in range(settings.w1_seeds)]
    distances = np.array(parallel_map(_w1_task, tasks, jobs)).reshape(len(settings.w1_sizes), settings.w1_seeds)
    means = distances.mean(axis=1)
    ses = np.array([_se(row) for row in distances])

    monotone = all(
        means[k + 1] <= means[k] + settings.noise_factor * math.hypot(ses[k], ses[k + 1]) for k in range(len(means) - 1)
    )
    final_ok = bool(means[-1] < settings.w1_final)
    return CriterionResult(
        name="rde_wasserstein",
        passed=bool(mean_ok and contracting and settled and monotone and final_ok),
        measured={
            "worst_mean_se": worst,
            "w1_trace": trace.tolist(),
            "w1_mean": means.tolist(),
            "w1_se": ses.tolist(),
        },
        threshold={"se_band": band, "final": settings.w1_final, "w1_step": tol},
        detail="sizes " + ",".join(str(n) for n in settings.w1_sizes),
    )


def info_second_moments(settings: AcceptanceSettings) -> CriterionResult:
    """Pool second moments of Z and M* against their closed forms (reported only)"""
    seq = from_groups(mixture_groups(settings.mixture_n))
    z_pool = sample_rde(seq, settings.rde_pool, settings.rde_iterations, task_stream(settings.seed, STREAM_RDE, 99))
    m_pool = sample_m_star(seq, z_pool, settings.m_star_samples, task_stream(settings.seed, STREAM_MSTAR, 99))
    _, z_fixed = rde_second_moment(seq, settings.rde_iterations)
    m_fixed = m_star_second_moment(seq)
    z_se = _se(z_pool.values ** 2)
    m_se = _se(m_pool.values ** 2)
    passed = abs(z_pool.second_moment - z_fixed) <= settings.se_band * z_se and abs(
        m_pool.second_moment - m_fixed
    ) <= settings.se_band * m_se
    return CriterionResult(
        name="second_moments",
        primary=False,
        passed=bool(passed),
        measured={"z": z_pool.second_moment, "m_star": m_pool.second_moment},
        threshold={"z": z_fixed, "m_star": m_fixed},
    )


# 8. Collisions


def _collision_sequence(name: str, settings: AcceptanceSettings) -> DegreeSequence:
    if name == "mixture":
        return from_groups(mixture_groups(settings.mixture_n))
    return _regular_sequence(3, 100)


def criterion_collisions(settings: AcceptanceSettings) -> CriterionResult:
    measured = {}
    passed = True
    for case, (name, k) in enumerate(settings.collision_cases):
        seq = _collision_sequence(name, settings)
        counts = np.array([
            sample_with_collision_trace(seq, task_stream(settings.seed, STREAM_COLLISIONS, case, s), k)[1].collisions
            for s in range(settings.collision_seeds)
        ])
        bound = collision_bound(seq, k)
        mean, se = float(counts.mean()), _se(counts.astype(np.float64))
        passed &= mean <= bound + settings.se_band * se
        measured[f"{name}_k{k}"] = {"mean": mean, "se": se, "bound": bound}
    return CriterionResult(name="collision_bound", passed=bool(passed), measured=measured, threshold=settings.se_band)


# 9. Annealed CLT


def criterion_clt(settings: AcceptanceSettings) -> CriterionResult:
    """
    Annealed q_t at theta = exp(-mu t + c sigma sqrt t) against the Gaussian tail

    The exact law is a lattice, so the mass sitting on theta itself is added
    to the tolerance; the Monte Carlo estimate must agree with the exact
    value within se_band standard errors.
    """
    seq = from_groups(mixture_groups(settings.mixture_n))
    stats = compute_stats(seq)
    measured = {}
    passed = True
    for idx, c in enumerate(settings.clt_cs):
        q = clt_query(stats, settings.clt_t, c)
        exact = annealed_q_exact(seq, q)
        atom = threshold_atom(seq, q)
        estimate, se = annealed_q(seq, q, settings.clt_samples, seed=task_stream(settings.seed, STREAM_ANNEALED, idx))
        tail = gaussian_tail(c)
        gaussian_ok = abs(exact - tail) <= settings.clt_tol + atom
        oracle_ok = abs(estimate - exact) <= settings.se_band * se + 1e-12
        passed &= gaussian_ok and oracle_ok
        measured[str(c)] = {"exact": exact, "estimate": estimate, "se": se, "gaussian": tail, "atom": atom}
    return CriterionResult(
        name="annealed_clt",
        passed=bool(passed),
        measured=measured,
        threshold=settings.clt_tol,
        detail=f"t={settings.clt_t}",
    )


# 10. Determinism


def _seeded_criteria(settings: AcceptanceSettings, jobs: int) -> list[CriterionResult]:
    """Every seeded criterion, primary and informational, in report order"""
    criteria = [criterion_path_oracle(settings), criterion_equilibrium(settings)]
    logger.info("Oracle criteria done")

    runs = mixture_runs(settings, jobs)
    criteria.append(criterion_convergence_bound(settings, runs))
    criteria.append(criterion_cutoff(settings, runs))
    criteria.append(criterion_window(settings, runs))
    logger.info("Mixture criteria done")

    criteria.append(criterion_martingale(settings))
    criteria.append(criterion_limits(settings, jobs))
    criteria.append(criterion_collisions(settings))
    criteria.append(criterion_clt(settings))
    criteria.append(info_proxy(settings, runs))
    criteria.append(info_second_moments(settings))
    return criteria


def criterion_determinism(settings: AcceptanceSettings, first: list[CriterionResult], jobs: int = 1) -> CriterionResult:
    """Replays the whole seeded report and compares serialised results byte for byte"""
    second = _seeded_criteria(settings, jobs)
    same = [a.model_dump_json() == b.model_dump_json() for a, b in zip(first, second, strict=True)]
    return CriterionResult(
        name="determinism",
        passed=all(same),
        measured={r.name: ok for r, ok in zip(first, same)},
    )


def run_acceptance(settings: AcceptanceSettings | None = None, jobs: int = 1) -> VerifyReport:
    """
    Execute every criterion

    Returns:
        VerifyReport: passed iff every primary criterion passed
    """
    settings = settings or AcceptanceSettings()
    seeded = _seeded_criteria(settings, jobs)
    primary = [result for result in seeded if result.primary]
    info = [result for result in seeded if not result.primary]
    criteria = [*primary, criterion_determinism(settings, seeded, jobs), *info]

    for result in criteria:
        level = logging.INFO if result.passed or not result.primary else logging.WARNING
        logger.log(level, "%s: %s", result.name, "pass" if result.passed else "FAIL")

    passed = all(result.passed for result in criteria if result.primary)
    return VerifyReport(seed=settings.seed, passed=passed, criteria=criteria)
