"""
File Format Tests

This module tests:
- Degree files and graph files (round trips and malformed input)
- CSV exports and their provenance header
- Atomic writes and JSON reports
"""

import numpy as np
import pytest

from errors import FileFormatError, InputError, SumMismatch
from graphmodel import EscapeProfile, sample_environment
from limits import SamplePool
from provenance import SeedRecord, task_stream
from schemas import RunManifest
from storage import (
    atomic_write_text,
    read_degree_file,
    read_graph_file,
    write_csv,
    write_escape_csv,
    write_degree_file,
    write_graph_file,
    write_json,
    write_pool_csv,
    write_profile_csv,
)
from walk import distance_profile

HEADER = "# config_hash=abc seed=1"


class TestDegreeFiles:
    """Test write_degree_file and read_degree_file"""

    def test_round_trip(self, tmp_path, small_mixture_seq):
        """Test that a written sequence reads back equal"""
        path = write_degree_file(tmp_path / "deg.txt", small_mixture_seq)
        assert read_degree_file(path) == small_mixture_seq

    def test_comments_ignored(self, tmp_path):
        """Test comment and blank lines"""
        path = tmp_path / "deg.txt"
        path.write_text("# two vertices\n2 4\n\n1 2\n# middle\n3 2\n")
        seq = read_degree_file(path)
        assert seq.entries() == [(1, 2), (3, 2)]

    def test_count_mismatch(self, tmp_path):
        """Test a header announcing the wrong number of vertices"""
        path = tmp_path / "deg.txt"
        path.write_text("3 4\n1 2\n3 2\n")
        with pytest.raises(FileFormatError):
            read_degree_file(path)

    def test_arc_mismatch(self, tmp_path):
        """Test a header announcing the wrong m"""
        path = tmp_path / "deg.txt"
        path.write_text("2 5\n1 2\n3 2\n")
        with pytest.raises(FileFormatError):
            read_degree_file(path)

    def test_not_integers(self, tmp_path):
        """Test non-numeric tokens"""
        path = tmp_path / "deg.txt"
        path.write_text("2 4\n1 two\n3 2\n")
        with pytest.raises(FileFormatError):
            read_degree_file(path)

    def test_sum_mismatch(self, tmp_path):
        """Test degrees that do not balance"""
        path = tmp_path / "deg.txt"
        path.write_text("2 4\n1 2\n3 3\n")
        with pytest.raises(SumMismatch):
            read_degree_file(path)

    def test_missing(self, tmp_path):
        """Test a file that does not exist"""
        with pytest.raises(InputError):
            read_degree_file(tmp_path / "nope.txt")


class TestGraphFiles:
    """Test write_graph_file and read_graph_file"""

    def test_round_trip(self, tmp_path, small_mixture_seq):
        """Test that a graph file rebuilds the same environment"""
        env = sample_environment(small_mixture_seq, task_stream(3, 1, 4, 0))
        path = write_graph_file(tmp_path / "graph.txt", env, HEADER)
        back = read_graph_file(path)
        assert back == env
        assert back.seed == SeedRecord(3, (1, 4, 0))

    def test_layout(self, tmp_path, periodic_env):
        """Test the exact text of a small graph file"""
        path = write_graph_file(tmp_path / "graph.txt", periodic_env)
        assert path.read_text() == "2 3 none\n0: 1\n1: 0 0\n"

    def test_wrong_vertex_label(self, tmp_path):
        """Test vertex lines out of order"""
        path = tmp_path / "graph.txt"
        path.write_text("2 3 none\n1: 0 0\n0: 1\n")
        with pytest.raises(FileFormatError):
            read_graph_file(path)

    def test_endpoint_out_of_range(self, tmp_path):
        """Test an arc to a missing vertex"""
        path = tmp_path / "graph.txt"
        path.write_text("2 3 none\n0: 1\n1: 0 2\n")
        with pytest.raises(FileFormatError):
            read_graph_file(path)

    def test_bad_seed_token(self, tmp_path):
        """Test a malformed seed token"""
        path = tmp_path / "graph.txt"
        path.write_text("2 3 x:y\n0: 1\n1: 0 0\n")
        with pytest.raises(FileFormatError):
            read_graph_file(path)


class TestCsvAndJson:
    """Test CSV writers, atomic writes and JSON output"""

    def test_csv_layout(self, tmp_path):
        """Test header, columns and number formatting"""
        path = write_csv(tmp_path / "x.csv", HEADER, ["t", "v", "name"], [(0, 0.1, "a"), (np.int64(2), 1 / 3, "b")])
        assert path.read_text().splitlines() == [HEADER, "t,v,name", "0,0.1,a", "2,0.3333333333333333,b"]

    def test_profile_csv(self, tmp_path, regular_env):
        """Test one row per time with NaN lambdas for w* = 0"""
        profile = distance_profile(regular_env, [0, 1], 3, target="exact")
        lines = write_profile_csv(tmp_path / "p.csv", HEADER, profile).read_text().splitlines()
        assert lines[1] == "t,lambda,tv_min,tv_mean,tv_max"
        assert len(lines) == 2 + 4
        assert lines[2].startswith("0,nan,")

    def test_csv_quotes_commas(self, tmp_path):
        """Test that a text field holding a comma stays one column"""
        path = write_csv(tmp_path / "q.csv", HEADER, ["t", "name"], [(1, "a,b"), (2, 'say "hi"')])
        assert path.read_text().splitlines()[2:] == ['1,"a,b"', '2,"say ""hi"""']

    def test_escape_csv(self, tmp_path):
        """Test the escape profile table and its horizon comment"""
        escape = EscapeProfile(
            horizon=1, ell=np.arange(3), measured=np.array([1.0, 0.5, 0.25]), bound=np.array([1.0, 0.5, 0.5])
        )
        lines = write_escape_csv(tmp_path / "e.csv", HEADER, escape).read_text().splitlines()
        assert lines == [HEADER, "# horizon=1", "ell,escape,bound", "0,1.0,1.0", "1,0.5,0.5", "2,0.25,0.5"]

    def test_pool_csv(self, tmp_path):
        """Test the pool comment line"""
        pool = SamplePool(np.array([1.0, 2.0]), "Z", meta={"seed": "7:6", "iterations": 3})
        lines = write_pool_csv(tmp_path / "z.csv", HEADER, pool).read_text().splitlines()
        assert lines == [HEADER, "# label=Z, size=2, seed=7:6, iterations=3", "value", "1.0", "2.0"]

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        """Test that only the target file remains"""
        atomic_write_text(tmp_path / "sub" / "a.txt", "hello\n")
        atomic_write_text(tmp_path / "sub" / "a.txt", "again\n")
        assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]
        assert (tmp_path / "sub" / "a.txt").read_text() == "again\n"

    def test_json_deterministic(self, tmp_path):
        """Test that equal models give identical bytes"""
        manifest = RunManifest(command="stats", config_hash="abc", seed=1, files=["stats.json"])
        a = write_json(tmp_path / "a.json", manifest).read_bytes()
        b = write_json(tmp_path / "b.json", manifest.model_copy()).read_bytes()
        assert a == b
        assert RunManifest.model_validate_json(a) == manifest
