"""
Random Digraph Cutoff Lab - Command Line Interface
Seeded, reproducible experiments on random walks over configuration-model digraphs

Subcommands:
    stats        closed-form statistics of a degree sequence
    gen          sample environments and write graph files
    profile      distance-to-equilibrium profiles and the Gaussian window check
    equilibrium  equilibrium weights, their histogram and the exponential bound table
    limits       population dynamics, martingale pools and W1 comparisons
    verify       the full acceptance suite

Every result file starts with '# config_hash=<hex> seed=<seed>'; identical
configs give byte-identical files whatever --jobs is.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from acceptance import parallel_map, run_acceptance
from degrees import DegreeSequence, compute_stats, from_groups, proxy_horizon, window_condition
from errors import EXIT_FAILURE, EXIT_OK, ConfigError, DegenerateDelta, DegenerateWindow, SimulationError, VerificationFailed
from graphmodel import (
    collision_bound,
    escape_profile,
    sample_connected_environment,
    sample_with_collision_trace,
    strongly_connected,
    v_star,
)
from limits import (
    equilibrium_weight_pool,
    pool_histogram,
    sample_m_star,
    sample_rde,
    simulate_martingale,
    walk_weight_pool,
    wasserstein1,
)
from paths import WeightQuery, distance_thresholds, quenched_q, window_profile_check, window_profile_check_pooled
from provenance import (
    STREAM_COLLISIONS,
    STREAM_MSTAR,
    STREAM_QUENCHED,
    STREAM_RDE,
    STREAM_STARTS,
    STREAM_TREES,
    config_hash,
    provenance_header,
    task_stream,
)
from schemas import AcceptanceSettings, EnvironmentReport, ExperimentConfig, RunManifest, StatsReport, load_config
from storage import (
    read_degree_file,
    write_bound_csv,
    write_escape_csv,
    write_graph_file,
    write_histogram_csv,
    write_json,
    write_matrix_csv,
    write_pool_csv,
    write_profile_csv,
    write_w1_csv,
    write_window_csv,
)
from walk import Distribution, advance, convergence_bound, distance_profile, equilibrium, proxy_equilibrium, select_starts, tv_distance

logger = logging.getLogger("cutofflab")


def load_sequence(config: ExperimentConfig) -> DegreeSequence:
    """
    Build the degree sequence named by the config

    Raises:
        ConfigError: neither groups nor degree_file given
    """
    if config.groups is not None:
        return from_groups(group.as_triple() for group in config.groups)
    if config.degree_file is not None:
        return read_degree_file(config.degree_file)
    raise ConfigError("No degree sequence: give 'groups' or 'degree_file'")


def _header(config: ExperimentConfig) -> str:
    return provenance_header(config_hash(config), config.seed)


def _manifest(config: ExperimentConfig, command: str, **fields) -> RunManifest:
    return RunManifest(command=command, config_hash=config_hash(config), seed=config.seed, **fields)


def _finish(config: ExperimentConfig, manifest: RunManifest) -> RunManifest:
    write_json(config.out_dir / f"{manifest.command}_manifest.json", manifest)
    print(f"✅ {manifest.command}: {len(manifest.files)} files written to {config.out_dir}")
    return manifest


def _environment(config: ExperimentConfig, seq: DegreeSequence, index: int):
    return sample_connected_environment(seq, config.seed, index=index, cap=config.resample_cap)


# stats


def cmd_stats(config: ExperimentConfig) -> StatsReport:
    """
    Print mu, sigma^2, rho, gamma, t*, w* and the window diagnostic

    Returns:
        StatsReport: also written to stats.json
    """
    seq = load_sequence(config)
    stats = compute_stats(seq)
    condition = window_condition(seq, stats)
    try:
        horizon = proxy_horizon(seq)
    except DegenerateDelta:
        horizon = None

    report = StatsReport(
        n=seq.n,
        m=seq.m,
        sparse_ok=seq.sparse_ok,
        mu=stats.mu,
        sigma2=stats.sigma2,
        rho=stats.rho,
        gamma=stats.gamma,
        t_star=stats.t_star,
        w_star=stats.w_star,
        delta=stats.delta,
        delta_max=stats.delta_max,
        window_lhs=condition.lhs,
        window_rhs=condition.rhs,
        window_flagged=condition.flagged,
        proxy_horizon=horizon,
    )

    print(f"📋 n={seq.n} m={seq.m} sparse_ok={seq.sparse_ok}")
    print(f"   mu={stats.mu:.6f} sigma2={stats.sigma2:.6f} rho={stats.rho:.6f} gamma={stats.gamma:.6f}")
    print(f"   t*={stats.t_star:.4f} w*={stats.w_star:.4f}")
    if condition.flagged:
        print(f"⚠️  sigma^2 ln n = {condition.lhs:.4f} < (ln ln n)^2 = {condition.rhs:.4f}: no Gaussian window expected")

    write_json(config.out_dir / "stats.json", report)
    _finish(config, _manifest(config, "stats", files=["stats.json"]))
    return report


# gen


def _gen_task(args: tuple[ExperimentConfig, DegreeSequence, int]):
    config, seq, index = args
    env, rejections = _environment(config, seq, index)
    k = min(config.collision_k, seq.m)
    _, trace = sample_with_collision_trace(seq, task_stream(config.seed, STREAM_COLLISIONS, index), k)
    inside = v_star(env)
    report = EnvironmentReport(
        index=index,
        seed=env.seed.to_token(),
        rejections=rejections,
        strongly_connected=strongly_connected(env),
        collision_k=k,
        collisions=trace.collisions,
        collision_bound=collision_bound(seq, k),
        v_star_size=len(inside),
        v_star_fraction=len(inside) / env.n,
    )
    return env, report


def cmd_gen(config: ExperimentConfig) -> RunManifest:
    """Sample n_env strongly connected environments and write one graph file each"""
    seq = load_sequence(config)
    results = parallel_map(_gen_task, [(config, seq, i) for i in range(config.n_env)], config.jobs)
    header = _header(config)
    files = []
    for env, report in results:
        name = f"graph_{report.index}.txt"
        write_graph_file(config.out_dir / name, env, header)
        files.append(name)
        print(
            f"🎲 environment {report.index}: rejections={report.rejections} "
            f"collisions={report.collisions}/{report.collision_k} (bound {report.collision_bound:.4f}) "
            f"V*={report.v_star_fraction:.3f}"
        )
    manifest = _manifest(
        config,
        "gen",
        files=files,
        rejections=[report.rejections for _, report in results],
        details={"environments": [report.model_dump() for _, report in results]},
    )
    return _finish(config, manifest)


# profile


def _profile_task(args: tuple[ExperimentConfig, DegreeSequence, int]):
    config, seq, index = args
    env, rejections = _environment(config, seq, index)
    fallbacks = 0
    if config.target == "exact":
        result = equilibrium(env, config.equilibrium_tol, config.max_iters)
        target, fallbacks = result.distribution, result.cesaro_fallbacks
    else:
        target = proxy_equilibrium(env)
    starts = select_starts(
        env,
        task_stream(config.seed, STREAM_STARTS, index),
        policy=config.start_policy,
        sample_size=config.start_sample,
        n_lowest=config.start_lowest,
        full_threshold=config.full_threshold,
        pi_star=target,
    )
    profile = distance_profile(env, starts, config.t_max, config.target, config.equilibrium_tol, target_dist=target)

    # Q at both distance thresholds for the first start, reported only
    stats = compute_stats(seq)
    t = max(1, round(stats.t_star))
    thresholds = {}
    if seq.n >= 2:
        for name, theta in zip(("upper", "lower"), distance_thresholds(seq.n)):
            query = WeightQuery.from_theta(t, min(theta, 1.0))
            stream = task_stream(config.seed, STREAM_QUENCHED, index)
            estimate, se = quenched_q(env, starts[0], query, config.mc_samples, seed=stream)
            thresholds[name] = {"theta": query.theta, "t": t, "q": estimate, "se": se}

    try:
        escape = escape_profile(env, config.t_max)
    except DegenerateDelta:
        escape = None
    return profile, rejections, fallbacks, thresholds, escape


def cmd_profile(config: ExperimentConfig) -> RunManifest:
    """Distance profiles of n_env environments plus the window comparison"""
    seq = load_sequence(config)
    stats = compute_stats(seq)
    results = parallel_map(_profile_task, [(config, seq, i) for i in range(config.n_env)], config.jobs)
    header = _header(config)
    files = []
    windows = {}
    for index, (profile, _, _, _, escape) in enumerate(results):
        name = f"profile_{index}.csv"
        write_profile_csv(config.out_dir / name, header, profile)
        files.append(name)
        if config.emit_matrix:
            name = f"matrix_{index}.csv"
            write_matrix_csv(config.out_dir / name, header, profile)
            files.append(name)
        if escape is not None:
            name = f"escape_{index}.csv"
            write_escape_csv(config.out_dir / name, header, escape)
            files.append(name)
        try:
            report = window_profile_check(profile, stats, config.window_half_width)
        except DegenerateWindow:
            print("⚠️  sigma^2 = 0: window check skipped")
            continue
        name = f"window_{index}.csv"
        write_window_csv(config.out_dir / name, header, report)
        files.append(name)
        windows[str(index)] = report.sup_gap
        print(f"📈 environment {index}: window sup gap {report.sup_gap:.4f}")

    profiles = [result[0] for result in results]
    if len(profiles) > 1 and windows:
        pooled = window_profile_check_pooled(profiles, stats, config.window_half_width)
        write_window_csv(config.out_dir / "window_pooled.csv", header, pooled)
        files.append("window_pooled.csv")
        windows["pooled"] = pooled.sup_gap
        print(f"📈 pooled window sup gap {pooled.sup_gap:.4f}")

    manifest = _manifest(
        config,
        "profile",
        files=files,
        rejections=[result[1] for result in results],
        details={
            "sup_gap": windows,
            "cesaro_fallbacks": [result[2] for result in results],
            "thresholds": [result[3] for result in results],
            "escape_horizon": [None if result[4] is None else result[4].horizon for result in results],
        },
    )
    return _finish(config, manifest)


# equilibrium


def _equilibrium_task(args: tuple[ExperimentConfig, DegreeSequence, int]):
    config, seq, index = args
    stats = compute_stats(seq)
    env, rejections = _environment(config, seq, index)
    result = equilibrium(env, config.equilibrium_tol, config.max_iters)
    pool = equilibrium_weight_pool(env, result.distribution)

    times = list(range(config.t_max + 1))
    tv, bound = [], []
    dist = Distribution.in_degree(env)
    for t in times:
        if t:
            dist = advance(env, dist, 1)
        tv.append(tv_distance(dist, result.distribution))
        bound.append(convergence_bound(stats, env.n, env.m, t))
    return pool, times, tv, bound, rejections, result.iterations, result.cesaro_fallbacks


def cmd_equilibrium(config: ExperimentConfig) -> RunManifest:
    """Equilibrium weight pools, histograms and the tv-vs-bound table"""
    seq = load_sequence(config)
    results = parallel_map(_equilibrium_task, [(config, seq, i) for i in range(config.n_env)], config.jobs)
    header = _header(config)
    files = []
    for index, (pool, times, tv, bound, _, iterations, _) in enumerate(results):
        names = (f"weights_{index}.csv", f"histogram_{index}.csv", f"bound_{index}.csv")
        write_pool_csv(config.out_dir / names[0], header, pool)
        edges, counts = pool_histogram(pool, config.hist_bin_width)
        write_histogram_csv(config.out_dir / names[1], header, edges, counts)
        write_bound_csv(config.out_dir / names[2], header, times, tv, bound)
        files.extend(names)
        print(f"⚖️  environment {index}: pi* after {iterations} iterations, tv(pi_0, pi*) = {tv[0]:.4f}")

    manifest = _manifest(
        config,
        "equilibrium",
        files=files,
        rejections=[r[4] for r in results],
        details={"iterations": [r[5] for r in results], "cesaro_fallbacks": [r[6] for r in results]},
    )
    return _finish(config, manifest)


# limits


def cmd_limits(config: ExperimentConfig) -> RunManifest:
    """Z and M* pools, martingale pools and W1 against the graph weights"""
    seq = load_sequence(config)
    header = _header(config)
    out = config.out_dir

    z_pool = sample_rde(seq, config.pool_size, config.pool_iterations, task_stream(config.seed, STREAM_RDE))
    m_pool = sample_m_star(seq, z_pool, config.mc_samples, task_stream(config.seed, STREAM_MSTAR))
    martingale = simulate_martingale(
        seq, config.tree_depth, config.trees, task_stream(config.seed, STREAM_TREES), node_budget=config.node_budget
    )
    write_pool_csv(out / "z_pool.csv", header, z_pool)
    write_pool_csv(out / "m_star_pool.csv", header, m_pool)
    write_pool_csv(out / f"m_t{config.tree_depth}_pool.csv", header, martingale[-1])
    files = ["z_pool.csv", "m_star_pool.csv", f"m_t{config.tree_depth}_pool.csv"]

    rows = [("M_t~M_star", t, wasserstein1(pool, m_pool)) for t, pool in enumerate(martingale)]
    rejections = []
    for index in range(config.n_env):
        env, rejected = _environment(config, seq, index)
        rejections.append(rejected)
        graph_pool = equilibrium_weight_pool(env, equilibrium(env, config.equilibrium_tol, config.max_iters).distribution)
        name = f"n_pi_star_{index}.csv"
        write_pool_csv(out / name, header, graph_pool)
        files.append(name)
        w1_star = wasserstein1(graph_pool, m_pool)
        rows.append((f"n_pi_star_{index}~M_star", "inf", w1_star))
        rows.extend(
            (f"n_pi_t_{index}~M_t", t, wasserstein1(walk_weight_pool(env, t), pool)) for t, pool in enumerate(martingale)
        )
        print(f"📏 environment {index}: W1(n pi*, M*) = {w1_star:.4f}")

    write_w1_csv(out / "w1.csv", header, rows)
    files.append("w1.csv")
    manifest = _manifest(config, "limits", files=files, rejections=rejections, details={"z_mean": z_pool.mean})
    return _finish(config, manifest)


# verify


def cmd_verify(config: ExperimentConfig) -> RunManifest:
    """
    Run the acceptance suite with the config's seed

    Raises:
        VerificationFailed: some primary criterion failed (after the report is written)
    """
    report = run_acceptance(AcceptanceSettings(seed=config.seed), jobs=config.jobs)
    write_json(config.out_dir / "verify.json", report)
    for result in report.criteria:
        mark = "✅" if result.passed else ("❌" if result.primary else "⚠️ ")
        print(f"{mark} {result.name}: measured={result.measured} threshold={result.threshold}")
    manifest = _finish(config, _manifest(config, "verify", files=["verify.json"]))
    if not report.passed:
        raise VerificationFailed("At least one primary acceptance criterion failed")
    return manifest


COMMANDS = {
    "stats": cmd_stats,
    "gen": cmd_gen,
    "profile": cmd_profile,
    "equilibrium": cmd_equilibrium,
    "limits": cmd_limits,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument("--seed", type=int, help="Root seed, overrides the config")
    common.add_argument("--out", type=Path, help="Output directory, overrides the config")
    common.add_argument("--jobs", type=int, help="Worker processes (speed only)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="cutofflab", description="Random walks on random directed graphs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__.strip().splitlines()[0])
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map errors to exit codes

    Returns:
        int: 0 ok, 2 config or input error, 3 resample cap exceeded,
        4 verification failure, 1 anything else
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")

    try:
        overrides = {"seed": args.seed, "out_dir": args.out, "jobs": args.jobs}
        config = load_config(args.config, overrides)
        print(f"🚀 {args.command} (seed={config.seed}, jobs={config.jobs})")
        COMMANDS[args.command](config)
    except SimulationError as exc:
        print(f"❌ {exc.detail}")
        return exc.exit_code
    except Exception as exc:
        logger.exception("Unexpected failure")
        print(f"❌ Unexpected failure: {exc}")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
