import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ehd.cli import main
from ehd.fixtures import build_planted_fixtures


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def model_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("model") / "m.json"
    path.write_text(
        json.dumps({"type": "hawkes_exp", "mu": [0.2], "alpha": [[0.5]], "beta": 1.0})
    )
    return path


@pytest.fixture(scope="module")
def planted_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("fx") / "planted"
    build_planted_fixtures(root, count=3, seed=0)
    return root


class TestSimulateCommand:
    def test_line_count_contract(self, runner, model_file, tmp_path):
        out = tmp_path / "seqs.jsonl"
        result = runner.invoke(
            main,
            ["simulate", "--model", str(model_file), "--n", "100", "--horizon", "100",
             "--seed", "7", "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert len(out.read_text().splitlines()) == 100

    def test_rerun_is_byte_identical(self, runner, model_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["simulate", "--model", str(model_file), "--n", "20", "--horizon", "50",
                "--seed", "3"]
        assert runner.invoke(main, args + ["-o", str(a)]).exit_code == 0
        assert runner.invoke(main, args + ["-o", str(b)]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_negative_horizon_exits_2(self, runner, model_file, tmp_path):
        result = runner.invoke(
            main,
            ["simulate", "--model", str(model_file), "--n", "2", "--horizon", "-1",
             "-o", str(tmp_path / "x.jsonl")],
        )
        assert result.exit_code == 2
        assert "horizon" in result.output

    def test_bad_model_file_exits_2(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"type\": \"unknown\"}")
        result = runner.invoke(
            main,
            ["simulate", "--model", str(bad), "--n", "1", "--horizon", "5",
             "-o", str(tmp_path / "x.jsonl")],
        )
        assert result.exit_code == 2

    def test_seed_env_var_fallback(self, runner, model_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["simulate", "--model", str(model_file), "--n", "5", "--horizon", "40"]
        assert runner.invoke(main, args + ["-o", str(a)], env={"EHD_SEED": "11"}).exit_code == 0
        assert runner.invoke(main, args + ["--seed", "11", "-o", str(b)]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()


class TestFitCommand:
    def _simulate(self, runner, model_file, tmp_path, n="40"):
        data = tmp_path / "seqs.jsonl"
        assert (
            runner.invoke(
                main,
                ["simulate", "--model", str(model_file), "--n", n, "--horizon", "80",
                 "--seed", "5", "-o", str(data)],
            ).exit_code
            == 0
        )
        return data

    def test_fit_writes_model_and_diagnostics(self, runner, model_file, tmp_path):
        data = self._simulate(runner, model_file, tmp_path)
        out = tmp_path / "fit.json"
        diag = tmp_path / "diag.json"
        result = runner.invoke(
            main,
            ["fit", "--data", str(data), "--marks", "1", "-o", str(out),
             "--diagnostics", str(diag)],
        )
        assert result.exit_code == 0, result.output
        model = json.loads(out.read_text())
        assert model["type"] == "hawkes_exp"
        d = json.loads(diag.read_text())
        assert d["nll_final"] <= d["nll_initial"]
        assert d["iterations"] >= 1

    def test_poisson_flag_uses_closed_form(self, runner, model_file, tmp_path):
        data = self._simulate(runner, model_file, tmp_path)
        out = tmp_path / "pois.json"
        result = runner.invoke(
            main, ["fit", "--data", str(data), "--marks", "1", "--poisson", "-o", str(out)]
        )
        assert result.exit_code == 0
        events = sum(
            len(json.loads(line)["events"]) for line in data.read_text().splitlines()
        )
        mu = json.loads(out.read_text())["mu"][0]
        assert mu == pytest.approx(events / (40 * 80.0), rel=1e-12)

    def test_empty_dataset_exits_2(self, runner, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        result = runner.invoke(
            main, ["fit", "--data", str(empty), "--marks", "1", "-o", str(tmp_path / "m.json")]
        )
        assert result.exit_code == 2

    def test_mark_out_of_range_exits_2(self, runner, model_file, tmp_path):
        data = self._simulate(runner, model_file, tmp_path)
        result = runner.invoke(
            main, ["fit", "--data", str(data), "--marks", "0", "-o", str(tmp_path / "m.json")]
        )
        assert result.exit_code == 2


class TestExplainCommand:
    def test_defaults_applied_when_flags_omitted(self, runner, planted_dir, tmp_path):
        fixture = sorted(planted_dir.iterdir())[0]
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["explain", "--model", str(fixture / "model.json"),
             "--instance", str(fixture / "instance.json"), "--solver", "brute",
             "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        obj = json.loads(out.read_text())
        assert obj["config"]["epsilon_d"] == 0.9
        assert obj["config"]["epsilon_l"] == 0.5

    def test_matches_shipped_oracle(self, runner, planted_dir, tmp_path):
        for fixture in sorted(planted_dir.iterdir()):
            oracle = json.loads((fixture / "oracle.json").read_text())
            out = tmp_path / f"{fixture.name}.json"
            result = runner.invoke(
                main,
                ["explain", "--model", str(fixture / "model.json"),
                 "--instance", str(fixture / "instance.json"), "--solver", "brute",
                 "-o", str(out)],
            )
            assert result.exit_code == 0
            obj = json.loads(out.read_text())
            assert obj["explanation"] == oracle["brute"]["explanation"]
            assert obj["size"] == oracle["brute"]["size"]

    def test_threshold_order_violation_exits_2(self, runner, planted_dir):
        fixture = sorted(planted_dir.iterdir())[0]
        result = runner.invoke(
            main,
            ["explain", "--model", str(fixture / "model.json"),
             "--instance", str(fixture / "instance.json"),
             "--epsilon-d", "0.4", "--epsilon-l", "0.5"],
        )
        assert result.exit_code == 2
        assert "exceed" in result.output

    def test_config_file_precedence(self, runner, planted_dir, tmp_path):
        fixture = sorted(planted_dir.iterdir())[0]
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epsilon_d": 0.95, "epsilon_l": 0.45}))
        out = tmp_path / "rep.json"
        result = runner.invoke(
            main,
            ["explain", "--model", str(fixture / "model.json"),
             "--instance", str(fixture / "instance.json"), "--config", str(cfg),
             "--epsilon-l", "0.4", "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        obj = json.loads(out.read_text())
        # flag beats config file; config file beats builtin default
        assert obj["config"]["epsilon_l"] == 0.4
        assert obj["config"]["epsilon_d"] == 0.95

    def test_brute_cap_exits_2(self, runner, model_file, tmp_path):
        times = [round(0.1 * i, 1) for i in range(1, 30)]
        inst = {
            "history": {
                "id": "h", "t0": 0.0, "t_end": 3.0,
                "events": [{"m": 0, "t": t} for t in times],
            },
            "target": {"id": "x", "t0": 3.0, "t_end": 4.0, "events": [{"m": 0, "t": 3.5}]},
        }
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(inst))
        result = runner.invoke(
            main,
            ["explain", "--model", str(model_file), "--instance", str(path),
             "--solver", "brute"],
        )
        assert result.exit_code == 2
        assert "greedy" in result.output

    def test_prints_indices_and_verdict(self, runner, planted_dir):
        fixture = sorted(planted_dir.iterdir())[0]
        result = runner.invoke(
            main,
            ["explain", "--model", str(fixture / "model.json"),
             "--instance", str(fixture / "instance.json"), "--solver", "greedy"],
        )
        assert result.exit_code == 0
        assert "explanation indices" in result.output
        assert "rational: True" in result.output


class TestBenchAndReport:
    def test_bench_count_and_resume(self, runner, planted_dir, tmp_path):
        out = tmp_path / "run"
        args = ["bench", "--fixtures", str(planted_dir), "--out", str(out),
                "--solvers", "brute,greedy,local"]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        reports = sorted(out.glob("*.json"))
        assert len(reports) == 9
        stamps = {p.name: p.stat().st_mtime_ns for p in reports}
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        assert "kept 9 existing" in result.output
        assert {p.name: p.stat().st_mtime_ns for p in sorted(out.glob("*.json"))} == stamps

    def test_jobs_settings_agree_bytewise(self, runner, planted_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        base = ["bench", "--fixtures", str(planted_dir), "--solvers", "brute,greedy"]
        assert runner.invoke(main, base + ["--out", str(a), "--jobs", "1"]).exit_code == 0
        assert runner.invoke(main, base + ["--out", str(b), "--jobs", "4"]).exit_code == 0
        for pa in sorted(a.glob("*.json")):
            assert pa.read_bytes() == (b / pa.name).read_bytes()

    def test_unknown_solver_exits_2(self, runner, planted_dir, tmp_path):
        result = runner.invoke(
            main,
            ["bench", "--fixtures", str(planted_dir), "--out", str(tmp_path / "r"),
             "--solvers", "brute,magic"],
        )
        assert result.exit_code == 2

    def test_report_aggregates_and_skips_corrupt(self, runner, planted_dir, tmp_path):
        out = tmp_path / "run"
        assert (
            runner.invoke(
                main,
                ["bench", "--fixtures", str(planted_dir), "--out", str(out),
                 "--solvers", "brute,greedy"],
            ).exit_code
            == 0
        )
        (out / "junk.json").write_text("{")
        csv_path = tmp_path / "metrics.csv"
        result = runner.invoke(
            main,
            ["report", "--run", str(out), "--out-csv", str(csv_path),
             "--plot-dir", str(tmp_path / "plots")],
        )
        assert result.exit_code == 0, result.output
        assert "skipped 1 corrupt" in result.output
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 3  # header + (brute, greedy)
        assert (tmp_path / "plots").exists()
        plot_files = list((tmp_path / "plots").glob("*.csv"))
        assert len(plot_files) == 2

    def test_report_on_empty_dir_warns(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(
            main, ["report", "--run", str(empty), "--out-csv", str(tmp_path / "m.csv")]
        )
        assert result.exit_code == 0
        assert "no valid reports" in result.output
