"""Batch benchmark harness and metrics aggregation.

``run_bench`` evaluates a set of solvers over a fixture dataset, writing one
explain report per (instance, solver) pair. Runs are resumable (existing
reports are kept untouched) and deterministic: report contents do not depend
on the number of worker threads, and timing capture is off by default so
reruns are byte-identical.

``aggregate_reports`` folds a run directory into a per-(dataset, solver)
metrics table emitted as CSV, plus per-solver plot-data files (instance
index against log-perplexity margins) for any plotting tool.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError
from .events import IndexSubset
from .fixtures import load_fixture
from .perplexity import PerplexityEvaluator
from .reports import (
    decode_extended,
    read_report,
    solve_report_to_obj,
    strip_timing_obj,
    write_json_atomic,
)
from .solver import EhdConfig, solve

__all__ = [
    "BenchResult",
    "MetricsRow",
    "MetricsTable",
    "run_bench",
    "aggregate_reports",
    "write_plot_data",
]


@dataclass(frozen=True)
class BenchResult:
    written: int
    skipped: int
    report_paths: tuple[str, ...]


def _discover_instances(dataset_dir: Path) -> list[Path]:
    dirs = sorted(
        p for p in dataset_dir.iterdir() if p.is_dir() and (p / "instance.json").exists()
    )
    if not dirs:
        raise ValidationError(f"no fixture instances found under {dataset_dir}")
    return dirs


def run_bench(
    dataset_dir: str | Path,
    out_dir: str | Path,
    solvers: tuple[str, ...],
    config: EhdConfig,
    jobs: int = 1,
    budget: int = 2000,
    cap: int = 22,
    timing: bool = False,
    dataset_name: str | None = None,
) -> BenchResult:
    """One report per (instance, solver); skips reports that already exist."""
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    if jobs < 1:
        raise ValidationError("jobs must be >= 1")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out_dir}: {exc}") from exc
    dataset = dataset_name or dataset_dir.name
    instances = _discover_instances(dataset_dir)

    tasks = []
    skipped = 0
    paths: list[str] = []
    for inst_dir in instances:
        for solver_name in solvers:
            report_path = out_dir / f"{inst_dir.name}__{solver_name}.json"
            paths.append(str(report_path))
            if report_path.exists():
                skipped += 1
                continue
            tasks.append((inst_dir, solver_name, report_path))

    def run_one(task) -> None:
        inst_dir, solver_name, report_path = task
        model, instance, oracle = load_fixture(inst_dir)
        evaluator = PerplexityEvaluator(model, instance)
        report = solve(
            solver_name, model, instance, config, budget=budget, cap=cap, evaluator=evaluator
        )
        truth = oracle.get("ground_truth")
        obj = solve_report_to_obj(
            report,
            dataset=dataset,
            instance=inst_dir.name,
            ground_truth=IndexSubset(tuple(truth)) if truth is not None else None,
        )
        if not timing:
            obj = strip_timing_obj(obj)
        write_json_atomic(report_path, obj)

    if jobs == 1 or len(tasks) <= 1:
        for task in tasks:
            run_one(task)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_one, tasks))
    return BenchResult(written=len(tasks), skipped=skipped, report_paths=tuple(paths))


@dataclass(frozen=True)
class MetricsRow:
    """Aggregate over all reports of one solver on one dataset.

    Precision and recall are against the planted ground truth and are None
    for datasets without one; mean wall time is None when timing capture was
    disabled.
    """

    dataset: str
    solver: str
    n_instances: int
    mean_size_ratio: float
    feasibility_rate: float
    rationality_rate: float
    mean_counterfactual_margin: float
    mean_factual_margin: float
    precision: float | None
    recall: float | None
    mean_evaluations: float
    mean_wall_time_s: float | None


_CSV_COLUMNS = [f.name for f in fields(MetricsRow)]


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricsRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in self.rows:
            record = []
            for name in _CSV_COLUMNS:
                value = getattr(row, name)
                if value is None:
                    record.append("")
                elif isinstance(value, float):
                    record.append(repr(value))
                else:
                    record.append(str(value))
            writer.writerow(record)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricsTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != _CSV_COLUMNS:
            raise ValidationError("metrics CSV header does not match the table schema")
        rows = []
        for record in reader:
            if not record:
                continue
            kwargs = {}
            for name, cell in zip(_CSV_COLUMNS, record):
                if name in ("dataset", "solver"):
                    kwargs[name] = cell
                elif name == "n_instances":
                    kwargs[name] = int(cell)
                elif cell == "":
                    kwargs[name] = None
                else:
                    kwargs[name] = float(cell)
            rows.append(MetricsRow(**kwargs))
        return cls(rows=tuple(rows))


def _mean(values: list[float]) -> float:
    if not values:
        return math.nan
    if any(math.isinf(v) for v in values):
        pos = any(v > 0 for v in values if math.isinf(v))
        neg = any(v < 0 for v in values if math.isinf(v))
        if pos and not neg:
            return math.inf
        if neg and not pos:
            return -math.inf
        return math.nan
    return sum(values) / len(values)


def aggregate_reports(run_dir: str | Path) -> tuple[MetricsTable, list[str]]:
    """Fold all reports under ``run_dir`` into a metrics table.

    Corrupt report files are collected into the skipped list instead of
    failing the aggregation.
    """
    run_dir = Path(run_dir)
    groups: dict[tuple[str, str], list[dict]] = {}
    skipped: list[str] = []
    for path in sorted(run_dir.glob("*.json")):
        try:
            obj = read_report(path)
            key = (str(obj.get("dataset") or ""), str(obj["solver"]))
            for required in ("size", "history_size", "margins", "feasible", "rational"):
                if required not in obj:
                    raise ValidationError(f"missing field {required}")
        except (ValidationError, KeyError):
            skipped.append(path.name)
            continue
        groups.setdefault(key, []).append(obj)

    rows = []
    for (dataset, solver) in sorted(groups):
        reports = sorted(groups[(dataset, solver)], key=lambda o: str(o.get("instance") or ""))
        size_ratios = [o["size"] / o["history_size"] for o in reports]
        c_margins = [decode_extended(o["margins"]["counterfactual"]) for o in reports]
        f_margins = [decode_extended(o["margins"]["factual"]) for o in reports]
        precisions: list[float] = []
        recalls: list[float] = []
        for o in reports:
            truth = o.get("ground_truth")
            if truth is None:
                continue
            chosen = set(o["explanation"])
            truth_set = set(truth)
            precisions.append(len(chosen & truth_set) / len(chosen) if chosen else 1.0)
            recalls.append(len(chosen & truth_set) / len(truth_set) if truth_set else 1.0)
        walls = [o["wall_time_s"] for o in reports if o.get("wall_time_s") is not None]
        rows.append(
            MetricsRow(
                dataset=dataset,
                solver=solver,
                n_instances=len(reports),
                mean_size_ratio=_mean(size_ratios),
                feasibility_rate=sum(bool(o["feasible"]) for o in reports) / len(reports),
                rationality_rate=sum(bool(o["rational"]) for o in reports) / len(reports),
                mean_counterfactual_margin=_mean(c_margins),
                mean_factual_margin=_mean(f_margins),
                precision=_mean(precisions) if precisions else None,
                recall=_mean(recalls) if recalls else None,
                mean_evaluations=_mean([float(o["n_evaluations"]) for o in reports]),
                mean_wall_time_s=_mean([float(w) for w in walls]) if walls else None,
            )
        )
    return MetricsTable(rows=tuple(rows)), skipped


def write_plot_data(run_dir: str | Path, plot_dir: str | Path) -> list[Path]:
    """Per-(dataset, solver) CSV of margins against the instance index."""
    run_dir = Path(run_dir)
    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list[dict]] = {}
    for path in sorted(run_dir.glob("*.json")):
        try:
            obj = read_report(path)
        except ValidationError:
            continue
        key = (str(obj.get("dataset") or ""), str(obj["solver"]))
        groups.setdefault(key, []).append(obj)
    written = []
    for (dataset, solver), reports in sorted(groups.items()):
        reports.sort(key=lambda o: str(o.get("instance") or ""))
        out = plot_dir / f"{dataset}__{solver}.csv"
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["index", "instance", "size_ratio", "counterfactual_margin", "factual_margin"]
            )
            for i, o in enumerate(reports):
                writer.writerow(
                    [
                        i,
                        o.get("instance") or "",
                        repr(o["size"] / o["history_size"]),
                        repr(decode_extended(o["margins"]["counterfactual"])),
                        repr(decode_extended(o["margins"]["factual"])),
                    ]
                )
        written.append(out)
    return written
