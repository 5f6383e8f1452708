"""
Flat-file formats

Degree files, graph files, CSV exports and JSON reports. Every write goes to
a temporary file in the target directory and is renamed into place, so a
crashed run never leaves a half-written result behind.
"""

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from degrees import DegreeSequence, build_degree_sequence
from errors import FileFormatError, InputError
from graphmodel import Environment, EscapeProfile
from limits import SamplePool
from paths import WindowReport
from provenance import SeedRecord
from walk import WalkProfile

logger = logging.getLogger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write text to path through a temporary sibling and os.replace"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("Wrote %s", path)
    return path


def _fmt(x) -> str:
    """Shortest round-tripping text for a float"""
    return repr(float(x))


def _data_lines(path: Path) -> list[str]:
    """Non-empty lines that are not comments"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"File not found: {path}")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]


def _ints(line: str, path: Path) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise FileFormatError(f"{path}: expected integers, got '{line}'")


# Degree files


def write_degree_file(path: Path, seq: DegreeSequence) -> Path:
    lines = [f"{seq.n} {seq.m}"]
    lines += [f"{dm} {dp}" for dm, dp in seq.entries()]
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_degree_file(path: Path) -> DegreeSequence:
    """
    Parse 'n m' then n lines 'd_minus d_plus'

    Raises:
        FileFormatError: malformed lines or counts that disagree with the header
        SumMismatch, ZeroDegree, EmptySequence: invalid degrees
    """
    lines = _data_lines(path)
    if not lines:
        raise FileFormatError(f"{path}: empty degree file")
    header = _ints(lines[0], path)
    if len(header) != 2:
        raise FileFormatError(f"{path}: header must be 'n m'")
    n, m = header
    entries = []
    for line in lines[1:]:
        pair = _ints(line, path)
        if len(pair) != 2:
            raise FileFormatError(f"{path}: expected 'd_minus d_plus', got '{line}'")
        entries.append(pair)
    if len(entries) != n:
        raise FileFormatError(f"{path}: header announces {n} vertices, found {len(entries)}")
    seq = build_degree_sequence(entries)
    if seq.m != m:
        raise FileFormatError(f"{path}: header announces m={m}, degrees sum to {seq.m}")
    return seq


# Graph files


def write_graph_file(path: Path, env: Environment, header: str | None = None) -> Path:
    """
    'n m seed' then one line 'i: j_1 ... j_{d_i^+}' per vertex, tails in order

    In-degrees are implied by the arc list, so the file alone rebuilds the
    environment.
    """
    token = env.seed.to_token() if env.seed else "none"
    lines = [header] if header else []
    lines.append(f"{env.n} {env.m} {token}")
    for i in range(env.n):
        targets = " ".join(str(j) for j in env.out_neighbors(i).tolist())
        lines.append(f"{i}: {targets}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_graph_file(path: Path) -> Environment:
    """
    Rebuild an Environment from a graph file

    Raises:
        FileFormatError: malformed header or vertex lines, or inconsistent counts
    """
    lines = _data_lines(path)
    if not lines:
        raise FileFormatError(f"{path}: empty graph file")
    parts = lines[0].split()
    if len(parts) != 3:
        raise FileFormatError(f"{path}: header must be 'n m seed'")
    n, m = _ints(" ".join(parts[:2]), path)
    seed = SeedRecord.from_token(parts[2])

    body = lines[1:]
    if len(body) != n:
        raise FileFormatError(f"{path}: header announces {n} vertices, found {len(body)}")
    out_lists = []
    for expected, line in enumerate(body):
        label, sep, rest = line.partition(":")
        if not sep or _ints(label, path) != [expected]:
            raise FileFormatError(f"{path}: expected a line for vertex {expected}, got '{line}'")
        out_lists.append(_ints(rest, path))

    d_plus = [len(out) for out in out_lists]
    heads = np.array([j for out in out_lists for j in out], dtype=np.int64)
    if heads.size != m:
        raise FileFormatError(f"{path}: header announces m={m}, found {heads.size} arcs")
    if heads.size and (heads.min() < 0 or heads.max() >= n):
        raise FileFormatError(f"{path}: arc endpoint outside the vertex range")
    d_minus = np.bincount(heads, minlength=n).tolist()
    seq = build_degree_sequence(zip(d_minus, d_plus))
    return Environment.from_heads(seq, heads, seed)


# CSV exports


def write_csv(path: Path, header: str, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    """
    Provenance line, optional extra comments, column names, then rows

    Integers are written as is and floats in their shortest exact form.
    """
    buffer = io.StringIO()
    buffer.write("\n".join([header, *comments]) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(str(v) if isinstance(v, (int, np.integer, str)) else _fmt(v) for v in row)
    return atomic_write_text(path, buffer.getvalue())


def write_profile_csv(path: Path, header: str, profile: WalkProfile) -> Path:
    rows = zip(
        profile.times.tolist(),
        profile.lambdas.tolist(),
        profile.tv_min.tolist(),
        profile.tv_mean.tolist(),
        profile.tv_max.tolist(),
    )
    return write_csv(path, header, ["t", "lambda", "tv_min", "tv_mean", "tv_max"], rows)


def write_matrix_csv(path: Path, header: str, profile: WalkProfile) -> Path:
    rows = (
        (t, start, profile.tv[k, col])
        for col, t in enumerate(profile.times.tolist())
        for k, start in enumerate(profile.start_set)
    )
    return write_csv(path, header, ["t", "start", "tv"], rows)


def write_window_csv(path: Path, header: str, report: WindowReport) -> Path:
    rows = zip(
        report.times.tolist(),
        report.lambda_grid.tolist(),
        report.tv_values.tolist(),
        report.gaussian_values.tolist(),
        report.gaps.tolist(),
    )
    return write_csv(path, header, ["t", "lambda", "tv_max", "gaussian", "gap"], rows)


def write_pool_csv(path: Path, header: str, pool: SamplePool) -> Path:
    meta = pool.meta
    comment = (
        f"# label={pool.label}, size={pool.size}, seed={meta.get('seed', 'none')}, "
        f"iterations={meta.get('iterations', meta.get('generation', 'none'))}"
    )
    return write_csv(path, header, ["value"], ((v,) for v in pool.values.tolist()), comments=[comment])


def write_histogram_csv(path: Path, header: str, edges: np.ndarray, counts: np.ndarray) -> Path:
    rows = zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist())
    return write_csv(path, header, ["bin_left", "bin_right", "count"], rows)


def write_escape_csv(path: Path, header: str, escape: EscapeProfile) -> Path:
    rows = zip(escape.ell.tolist(), escape.measured.tolist(), escape.bound.tolist())
    return write_csv(path, header, ["ell", "escape", "bound"], rows, comments=[f"# horizon={escape.horizon}"])


def write_bound_csv(path: Path, header: str, times: Sequence[int], tv: Sequence[float], bound: Sequence[float]) -> Path:
    return write_csv(path, header, ["t", "tv", "bound"], zip(times, tv, bound))


def write_w1_csv(path: Path, header: str, rows: Iterable[tuple[str, int, float]]) -> Path:
    return write_csv(path, header, ["comparison", "t", "w1"], rows)


def write_json(path: Path, model: BaseModel) -> Path:
    """Pydantic model as indented JSON, deterministic for equal models"""
    return atomic_write_text(path, model.model_dump_json(indent=2) + "\n")
