"""Command-line interface.

Subcommands: ``simulate`` (sample sequences from a model file), ``fit``
(maximum-likelihood estimation to a model file plus diagnostics),
``explain`` (solve one instance), ``bench`` (batch reports over a fixture
dataset), ``report`` (aggregate a run directory into CSV and plot data), and
``fixtures`` (regenerate the shipped fixture tree).

Exit codes: 0 success, 2 usage or validation error, 3 internal numerical
failure. ``--seed`` falls back to the ``EHD_SEED`` environment variable.
Threshold precedence: flags, then ``--config`` file, then built-in defaults
(0.9 / 0.5).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import fixtures as fixtures_mod
from .errors import NumericalError, ValidationError
from .events import load_instance, read_sequences, write_sequences
from .fitting import FitConfig, fit_mle, fit_poisson
from .models import dump_model, load_model
from .perplexity import PerplexityEvaluator
from .reports import solve_report_to_obj, strip_timing_obj, write_json_atomic
from .simulate import simulate
from .solver import (
    DEFAULT_BRUTE_FORCE_CAP,
    DEFAULT_LOCAL_SEARCH_BUDGET,
    EhdConfig,
    SOLVER_NAMES,
    solve,
)

DEFAULT_EPSILON_D = 0.9
DEFAULT_EPSILON_L = 0.5


def _exit_codes(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)

    return wrapper


seed_option = click.option(
    "--seed",
    type=int,
    default=0,
    show_default=True,
    envvar="EHD_SEED",
    help="RNG seed (falls back to $EHD_SEED).",
)


@click.group()
def main() -> None:
    """Minimal rational history explanations for event-sequence models."""


@main.command("simulate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "count", type=int, required=True, help="Number of sequences.")
@click.option("--horizon", type=float, required=True, help="Window length per sequence.")
@click.option("--t0", type=float, default=0.0, show_default=True)
@seed_option
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_exit_codes
def simulate_cmd(model_path: str, count: int, horizon: float, t0: float, seed: int, output: str):
    """Sample sequences from a model file into a JSON Lines file."""
    if count < 1:
        raise ValidationError("--n must be >= 1")
    if horizon <= 0:
        raise ValidationError("--horizon must be positive")
    model = load_model(model_path)
    seqs = [
        simulate(model, (t0, t0 + horizon), seed=seed + i, seq_id=f"seq-{i:05d}")
        for i in range(count)
    ]
    write_sequences(output, seqs)
    click.echo(f"wrote {len(seqs)} sequences to {output}")


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--marks", "mark_count", type=int, required=True, help="Number of marks.")
@click.option("--poisson", is_flag=True, help="Fit the closed-form Poisson model instead.")
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@seed_option
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--diagnostics", "diag_path", type=click.Path(dir_okay=False), default=None)
@_exit_codes
def fit_cmd(data_path, mark_count, poisson, max_iter, tol, seed, output, diag_path):
    """Fit a model to a JSON Lines dataset; writes model and diagnostics."""
    if mark_count < 1:
        raise ValidationError("--marks must be >= 1")
    dataset = read_sequences(data_path, mark_count=mark_count)
    if not dataset:
        raise ValidationError(f"{data_path} contains no sequences")
    if poisson:
        model, diag = fit_poisson(dataset, mark_count)
    else:
        config = FitConfig(max_iterations=max_iter, gradient_tolerance=tol)
        model, diag = fit_mle(dataset, mark_count, config, seed=seed)
    dump_model(output, model)
    diag_obj = {
        "iterations": diag.iterations,
        "nll_initial": diag.nll_initial,
        "nll_final": diag.nll_final,
        "gradient_norm": diag.gradient_norm,
        "converged": diag.converged,
        "stationary": diag.stationary,
        "nll_trace": diag.nll_trace,
    }
    diag_file = diag_path or str(Path(output).with_name("fit_diag.json"))
    write_json_atomic(diag_file, diag_obj)
    click.echo(
        f"fitted {'poisson' if poisson else 'hawkes_exp'} model: "
        f"final NLL {diag.nll_final:.6f} after {diag.iterations} iterations -> {output}"
    )


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return obj


def _resolve_thresholds(epsilon_d, epsilon_l, config_file) -> EhdConfig:
    # precedence: flags > config file > built-in defaults
    file_cfg = _load_config_file(config_file)
    eps_d = epsilon_d if epsilon_d is not None else file_cfg.get("epsilon_d", DEFAULT_EPSILON_D)
    eps_l = epsilon_l if epsilon_l is not None else file_cfg.get("epsilon_l", DEFAULT_EPSILON_L)
    return EhdConfig(epsilon_d=float(eps_d), epsilon_l=float(eps_l))


@main.command("explain")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--solver", "solver_name", type=click.Choice(SOLVER_NAMES), default="brute", show_default=True)
@click.option("--epsilon-d", type=float, default=None, help=f"Factual threshold (default {DEFAULT_EPSILON_D}).")
@click.option("--epsilon-l", type=float, default=None, help=f"Counterfactual threshold (default {DEFAULT_EPSILON_L}).")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--budget", type=int, default=DEFAULT_LOCAL_SEARCH_BUDGET, show_default=True)
@click.option("--cap", type=int, default=DEFAULT_BRUTE_FORCE_CAP, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Report file.")
@click.option("--timing/--no-timing", default=True, show_default=True, help="Record wall time in the report.")
@_exit_codes
def explain_cmd(model_path, instance_path, solver_name, epsilon_d, epsilon_l, config_file, budget, cap, output, timing):
    """Solve one instance; prints the chosen indices and the verdict.

    Exits 0 when the result satisfies both constraints; exits 1 when a
    single-constraint baseline returns an explanation violating the other
    constraint.
    """
    config = _resolve_thresholds(epsilon_d, epsilon_l, config_file)
    model = load_model(model_path)
    instance = load_instance(instance_path)
    evaluator = PerplexityEvaluator(model, instance)
    report = solve(
        solver_name, model, instance, config, budget=budget, cap=cap, evaluator=evaluator
    )
    obj = solve_report_to_obj(report, instance=Path(instance_path).stem)
    if not timing:
        obj = strip_timing_obj(obj)
    if output is not None:
        write_json_atomic(output, obj)
    click.echo(f"explanation indices: {list(report.partition.explanation.indices)}")
    click.echo(
        f"size {report.size}/{report.history_size}, feasible: {report.ppl.feasible}, "
        f"rational: {report.ppl.rational}"
    )
    if not report.ppl.feasible:
        sys.exit(1)


@main.command("bench")
@click.option("--fixtures", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--solvers", default="brute,greedy,local", show_default=True, help="Comma-separated solver names.")
@click.option("--epsilon-d", type=float, default=None)
@click.option("--epsilon-l", type=float, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--budget", type=int, default=DEFAULT_LOCAL_SEARCH_BUDGET, show_default=True)
@click.option("--cap", type=int, default=DEFAULT_BRUTE_FORCE_CAP, show_default=True)
@click.option("--timing/--no-timing", default=False, show_default=True,
              help="Record wall time (off keeps reruns byte-identical).")
@_exit_codes
def bench_cmd(dataset_dir, out_dir, solvers, epsilon_d, epsilon_l, config_file, jobs, budget, cap, timing):
    """Write one explain report per (instance, solver); resumable."""
    config = _resolve_thresholds(epsilon_d, epsilon_l, config_file)
    solver_names = tuple(s.strip() for s in solvers.split(",") if s.strip())
    for name in solver_names:
        if name not in SOLVER_NAMES:
            raise ValidationError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
    result = bench_mod.run_bench(
        dataset_dir,
        out_dir,
        solver_names,
        config,
        jobs=jobs,
        budget=budget,
        cap=cap,
        timing=timing,
    )
    click.echo(f"wrote {result.written} reports, kept {result.skipped} existing")


@main.command("report")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-csv", required=True, type=click.Path(dir_okay=False))
@click.option("--plot-dir", type=click.Path(file_okay=False), default=None)
@_exit_codes
def report_cmd(run_dir, out_csv, plot_dir):
    """Aggregate a run directory into a metrics CSV and plot-data files."""
    table, skipped = bench_mod.aggregate_reports(run_dir)
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write(table.to_csv())
    if plot_dir is not None:
        files = bench_mod.write_plot_data(run_dir, plot_dir)
        click.echo(f"wrote {len(files)} plot-data files to {plot_dir}")
    click.echo(f"wrote {len(table.rows)} metric rows to {out_csv}")
    if not table.rows:
        click.echo("warning: no valid reports found", err=True)
    if skipped:
        click.echo(f"warning: skipped {len(skipped)} corrupt report files:", err=True)
        for name in skipped:
            click.echo(f"  {name}", err=True)


@main.command("fixtures")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--planted", "planted_count", type=int, default=12, show_default=True)
@seed_option
@_exit_codes
def fixtures_cmd(out_dir, planted_count, seed):
    """Regenerate the shipped fixture tree (planted + adversarial)."""
    summary = fixtures_mod.build_all_fixtures(out_dir, seed=seed, planted_count=planted_count)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
