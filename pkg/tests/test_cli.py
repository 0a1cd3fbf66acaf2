import json

import pytest
from click.testing import CliRunner

from budwalk.cli import main
from budwalk.graph import load_graph


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def grid_file(tmp_path, runner):
    path = tmp_path / "grid.json"
    result = runner.invoke(main, ["grid", "--rows", "2", "--cols", "2",
                                  "--out", str(path)])
    assert result.exit_code == 0
    return str(path)


class TestGrid:
    def test_stdout_round_trip(self, runner):
        result = runner.invoke(main, ["grid", "--rows", "3", "--cols", "2"])
        assert result.exit_code == 0
        g = load_graph(result.output)
        assert g.n == 6 and len(g.edges) == 7

    def test_bad_dimensions_usage_error(self, runner):
        result = runner.invoke(main, ["grid", "--rows", "0", "--cols", "3"])
        assert result.exit_code == 2

    def test_file_output(self, grid_file):
        with open(grid_file) as fh:
            assert load_graph(fh).n == 4


class TestRun:
    def test_trace_and_summary(self, runner, grid_file, tmp_path):
        trace = tmp_path / "trace.jsonl"
        result = runner.invoke(main, [
            "run", "--graph", grid_file, "--k", "2", "--lower", "2",
            "--upper", "2", "--steps", "20", "--seed", "5",
            "--out", str(trace),
        ])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["chains"][0]["steps"] == 20
        lines = trace.read_text().splitlines()
        assert len(lines) == 20
        rec = json.loads(lines[0])
        assert rec["kind"] == "bud-marked" and "cut_edges" in rec["obs"]

    def test_same_seed_byte_identical(self, runner, grid_file, tmp_path):
        texts = []
        for name in ("a.jsonl", "b.jsonl"):
            trace = tmp_path / name
            result = runner.invoke(main, [
                "run", "--graph", grid_file, "--k", "2", "--epsilon", "0",
                "--steps", "30", "--seed", "7", "--out", str(trace),
            ])
            assert result.exit_code == 0, result.output
            texts.append(trace.read_text())
        assert texts[0] == texts[1]

    def test_zero_steps(self, runner, grid_file, tmp_path):
        trace = tmp_path / "t.jsonl"
        result = runner.invoke(main, [
            "run", "--graph", grid_file, "--k", "2", "--lower", "2",
            "--upper", "2", "--steps", "0", "--out", str(trace),
        ])
        assert result.exit_code == 0
        assert trace.read_text() == ""

    def test_epsilon_and_bounds_conflict(self, runner, grid_file, tmp_path):
        result = runner.invoke(main, [
            "run", "--graph", grid_file, "--k", "2", "--epsilon", "0",
            "--lower", "2", "--upper", "2", "--steps", "1",
            "--out", str(tmp_path / "t"),
        ])
        assert result.exit_code == 2

    def test_missing_bounds(self, runner, grid_file, tmp_path):
        result = runner.invoke(main, [
            "run", "--graph", grid_file, "--k", "2", "--steps", "1",
            "--out", str(tmp_path / "t"),
        ])
        assert result.exit_code == 2

    def test_missing_graph_file(self, runner, tmp_path):
        result = runner.invoke(main, [
            "run", "--graph", str(tmp_path / "nope.json"), "--k", "2",
            "--epsilon", "0", "--steps", "1", "--out", str(tmp_path / "t"),
        ])
        assert result.exit_code != 0

    def test_multichain_writes_suffixed_files(self, runner, grid_file, tmp_path):
        trace = tmp_path / "multi.jsonl"
        result = runner.invoke(main, [
            "run", "--graph", grid_file, "--k", "2", "--epsilon", "0",
            "--steps", "10", "--seed", "3", "--out", str(trace),
            "--chains", "2",
        ])
        assert result.exit_code == 0, result.output
        assert trace.exists() and (tmp_path / "multi.jsonl.chain1").exists()
        summary = json.loads(result.output)
        assert {c["chain_index"] for c in summary["chains"]} == {0, 1}


class TestEnumerate:
    def test_splittable_count_four_by_four(self, runner, tmp_path):
        path = tmp_path / "g.json"
        runner.invoke(main, ["grid", "--rows", "4", "--cols", "4",
                             "--out", str(path)])
        result = runner.invoke(main, [
            "enumerate", "--graph", str(path), "--k", "4", "--epsilon", "0",
            "--what", "splittable-count",
        ])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert doc == {"splittable_trees": "35624", "spanning_trees": "100352"}

    def test_partitions_with_listing(self, runner, grid_file):
        result = runner.invoke(main, [
            "enumerate", "--graph", grid_file, "--k", "2", "--lower", "2",
            "--upper", "2", "--what", "partitions", "--full",
        ])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["partitions"] == 2 and len(doc["list"]) == 2

    def test_marked_sets(self, runner, grid_file):
        result = runner.invoke(main, [
            "enumerate", "--graph", grid_file, "--k", "2", "--epsilon", "0",
            "--what", "marked-sets",
        ])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["splittable_trees"] == "4" and doc["marked_trees"] == "4"

    def test_guard_exit_code(self, runner, tmp_path):
        path = tmp_path / "big.json"
        runner.invoke(main, ["grid", "--rows", "6", "--cols", "6",
                             "--out", str(path)])
        result = runner.invoke(main, [
            "enumerate", "--graph", str(path), "--k", "4", "--epsilon", "0",
            "--what", "partitions",
        ])
        assert result.exit_code == 1


class TestAnalyze:
    @pytest.fixture
    def traces(self, runner, grid_file, tmp_path):
        paths = []
        for i, seed in enumerate(("1", "2")):
            p = tmp_path / f"t{i}.jsonl"
            result = runner.invoke(main, [
                "run", "--graph", grid_file, "--k", "2", "--epsilon", "0",
                "--steps", "60", "--seed", seed, "--out", str(p),
            ])
            assert result.exit_code == 0, result.output
            paths.append(str(p))
        return paths

    def test_report(self, runner, traces):
        result = runner.invoke(main, ["analyze", *traces, "--max-lag", "10"])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["observable"] == "cut_edges"
        assert len(report["traces"]) == 2
        assert all(t["count"] == 60 for t in report["traces"])
        assert "0,1" in report["pairwise_tv"]
        assert 0.0 <= report["pairwise_tv"]["0,1"] <= 1.0

    def test_tree_diameter_observable(self, runner, traces):
        result = runner.invoke(main, ["analyze", traces[0],
                                      "--observable", "tree_diameter"])
        assert result.exit_code == 0, result.output

    def test_unknown_observable(self, runner, traces):
        result = runner.invoke(main, ["analyze", traces[0],
                                      "--observable", "mystery"])
        assert result.exit_code == 2

    def test_missing_file(self, runner):
        result = runner.invoke(main, ["analyze", "does-not-exist.jsonl"])
        assert result.exit_code == 2


class TestValidate:
    def test_reports_and_exit_codes(self, runner, monkeypatch):
        from budwalk import validation

        def fake(level):
            return [validation.CheckResult("demo", True, "ok")]

        monkeypatch.setattr(validation, "run_checks", fake)
        result = runner.invoke(main, ["validate", "--level", "fast"])
        assert result.exit_code == 0
        assert "demo" in result.output

    def test_failure_exits_one(self, runner, monkeypatch):
        from budwalk import validation

        def fake(level):
            return [validation.CheckResult("demo", False, "bad")]

        monkeypatch.setattr(validation, "run_checks", fake)
        result = runner.invoke(main, ["validate"])
        assert result.exit_code == 1
