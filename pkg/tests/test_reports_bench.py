import json
import math

import pytest

from ehd.bench import MetricsRow, MetricsTable, aggregate_reports, run_bench, write_plot_data
from ehd.errors import ValidationError
from ehd.fixtures import build_planted_fixtures, random_hawkes_instance
from ehd.reports import (
    canonical_json,
    decode_extended,
    encode_extended,
    read_report,
    solve_report_from_obj,
    solve_report_to_obj,
    strip_timing_obj,
    write_json_atomic,
)
from ehd.solver import EhdConfig, brute_force_solve, greedy_solve


class TestExtendedReals:
    def test_infinities_round_trip_through_strings(self):
        assert encode_extended(math.inf) == "inf"
        assert encode_extended(-math.inf) == "-inf"
        assert decode_extended("inf") == math.inf
        assert decode_extended("-inf") == -math.inf
        assert decode_extended(1.25) == 1.25

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            encode_extended(math.nan)

    def test_bad_string_rejected(self):
        with pytest.raises(ValidationError):
            decode_extended("huge")


class TestReportSerialization:
    def test_report_obj_round_trip(self):
        model, inst = random_hawkes_instance(4)
        report = brute_force_solve(model, inst, EhdConfig(0.9, 0.5))
        obj = solve_report_to_obj(report, dataset="d", instance="i")
        again = solve_report_from_obj(obj)
        assert again.partition == report.partition
        assert again.ppl == report.ppl
        assert again.config == report.config
        assert again.n_evaluations == report.n_evaluations

    def test_canonical_json_is_stable(self):
        model, inst = random_hawkes_instance(4)
        report = brute_force_solve(model, inst, EhdConfig(0.9, 0.5))
        a = canonical_json(strip_timing_obj(solve_report_to_obj(report)))
        b = canonical_json(strip_timing_obj(solve_report_to_obj(report)))
        assert a == b

    def test_write_read_report(self, tmp_path):
        model, inst = random_hawkes_instance(2)
        report = greedy_solve(model, inst, EhdConfig(0.9, 0.5))
        path = tmp_path / "r.json"
        write_json_atomic(path, solve_report_to_obj(report, instance="x"))
        obj = read_report(path)
        assert obj["instance"] == "x"
        assert obj["solver"] == "greedy"

    def test_non_report_rejected(self, tmp_path):
        path = tmp_path / "r.json"
        path.write_text("{}")
        with pytest.raises(ValidationError, match="schema"):
            read_report(path)


@pytest.fixture(scope="module")
def small_dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fx")
    build_planted_fixtures(root / "planted", count=3, seed=0)
    return root / "planted"


class TestRunBench:
    def test_report_count_contract(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        result = run_bench(
            small_dataset_dir, out, ("brute", "greedy", "fa-only"), EhdConfig(0.9, 0.5)
        )
        assert result.written == 9
        assert len(list(out.glob("*.json"))) == 9

    def test_resume_skips_existing(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute",), EhdConfig(0.9, 0.5))
        stamps = {p.name: p.stat().st_mtime_ns for p in out.glob("*.json")}
        result = run_bench(small_dataset_dir, out, ("brute",), EhdConfig(0.9, 0.5))
        assert result.written == 0 and result.skipped == 3
        assert {p.name: p.stat().st_mtime_ns for p in out.glob("*.json")} == stamps

    def test_jobs_do_not_change_bytes(self, small_dataset_dir, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_bench(small_dataset_dir, a, ("brute", "greedy"), EhdConfig(0.9, 0.5), jobs=1)
        run_bench(small_dataset_dir, b, ("brute", "greedy"), EhdConfig(0.9, 0.5), jobs=4)
        for pa in sorted(a.glob("*.json")):
            assert pa.read_bytes() == (b / pa.name).read_bytes()

    def test_ground_truth_copied_into_reports(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute",), EhdConfig(0.9, 0.5))
        obj = read_report(sorted(out.glob("*.json"))[0])
        assert obj["ground_truth"] is not None

    def test_empty_dataset_rejected(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(ValidationError, match="no fixture instances"):
            run_bench(empty, tmp_path / "run", ("brute",), EhdConfig(0.9, 0.5))


class TestAggregation:
    def test_metrics_table(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute", "greedy"), EhdConfig(0.9, 0.5))
        table, skipped = aggregate_reports(out)
        assert skipped == []
        assert len(table.rows) == 2
        for row in table.rows:
            assert row.n_instances == 3
            assert row.feasibility_rate == 1.0
            assert row.rationality_rate == 1.0
            assert 0 < row.mean_size_ratio <= 1
            assert row.recall is not None and row.recall == 1.0
            assert row.mean_wall_time_s is None  # timing off by default

    def test_corrupt_reports_are_listed_not_fatal(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute",), EhdConfig(0.9, 0.5))
        (out / "broken.json").write_text("{ not json")
        table, skipped = aggregate_reports(out)
        assert skipped == ["broken.json"]
        assert len(table.rows) == 1

    def test_empty_run_dir_gives_empty_table(self, tmp_path):
        table, skipped = aggregate_reports(tmp_path)
        assert table.rows == ()
        assert skipped == []

    def test_csv_round_trip_is_exact(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute", "local"), EhdConfig(0.9, 0.5))
        table, _ = aggregate_reports(out)
        text = table.to_csv()
        assert MetricsTable.from_csv(text) == table

    def test_csv_round_trips_infinities(self):
        row = MetricsRow(
            dataset="d",
            solver="s",
            n_instances=1,
            mean_size_ratio=1.0,
            feasibility_rate=1.0,
            rationality_rate=1.0,
            mean_counterfactual_margin=math.inf,
            mean_factual_margin=0.1,
            precision=None,
            recall=None,
            mean_evaluations=4.0,
            mean_wall_time_s=None,
        )
        table = MetricsTable(rows=(row,))
        assert MetricsTable.from_csv(table.to_csv()) == table

    def test_plot_data_files(self, small_dataset_dir, tmp_path):
        out = tmp_path / "run"
        run_bench(small_dataset_dir, out, ("brute", "greedy"), EhdConfig(0.9, 0.5))
        files = write_plot_data(out, tmp_path / "plots")
        assert len(files) == 2
        header = files[0].read_text().splitlines()[0]
        assert header == "index,instance,size_ratio,counterfactual_margin,factual_margin"
        assert len(files[0].read_text().splitlines()) == 4
