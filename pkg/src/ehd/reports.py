"""Explain-report files: canonical JSON with an explicit infinity encoding.

Log-perplexities and margins are extended reals; JSON has no infinity
literal, so ``+inf``/``-inf`` are written as the strings ``"inf"`` and
``"-inf"``. Serialization is canonical (sorted keys, fixed indentation,
``repr``-shortest floats), so identical reports are byte-identical files.
The wall-clock field is the only non-deterministic report content and may be
null when reproducibility matters more than timing.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

from .errors import ValidationError
from .events import IndexSubset
from .solver import EhdConfig, Partition, PplReport, SolveReport

__all__ = [
    "REPORT_SCHEMA",
    "encode_extended",
    "decode_extended",
    "canonical_json",
    "solve_report_to_obj",
    "solve_report_from_obj",
    "strip_timing_obj",
    "write_json_atomic",
    "read_report",
]

REPORT_SCHEMA = "ehd/explain-report/v1"


def encode_extended(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise ValidationError("cannot serialize NaN")
    return float(x)


def decode_extended(v: float | str) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ValidationError(f"invalid extended real {v!r}")
    return float(v)


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json_atomic(path: str | Path, obj) -> None:
    """Write-temp-then-rename, so readers never observe partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(obj))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def solve_report_to_obj(
    report: SolveReport,
    dataset: str | None = None,
    instance: str | None = None,
    ground_truth: IndexSubset | None = None,
) -> dict:
    ppl = report.ppl
    return {
        "schema": REPORT_SCHEMA,
        "dataset": dataset,
        "instance": instance,
        "solver": report.solver,
        "config": {
            "epsilon_d": report.config.epsilon_d,
            "epsilon_l": report.config.epsilon_l,
            "slack": report.config.slack,
        },
        "history_size": report.history_size,
        "explanation": list(report.partition.explanation.indices),
        "complement": list(report.partition.complement.indices),
        "size": report.size,
        "log_ppl": {
            "full": encode_extended(ppl.log_ppl_full),
            "explanation": encode_extended(ppl.log_ppl_explanation),
            "complement": encode_extended(ppl.log_ppl_complement),
        },
        "margins": {
            "counterfactual": encode_extended(ppl.counterfactual_margin),
            "factual": encode_extended(ppl.factual_margin),
        },
        "constraints": {
            "counterfactual": ppl.counterfactual_ok,
            "factual": ppl.factual_ok,
        },
        "feasible": ppl.feasible,
        "rational": ppl.rational,
        "optimal": report.optimal,
        "n_evaluations": report.n_evaluations,
        "wall_time_s": report.wall_time_s,
        "ground_truth": list(ground_truth.indices) if ground_truth is not None else None,
    }


def solve_report_from_obj(obj: dict) -> SolveReport:
    try:
        config = EhdConfig(
            epsilon_d=float(obj["config"]["epsilon_d"]),
            epsilon_l=float(obj["config"]["epsilon_l"]),
            slack=float(obj["config"].get("slack", 0.0)),
        )
        partition = Partition(
            explanation=IndexSubset(tuple(int(i) for i in obj["explanation"])),
            complement=IndexSubset(tuple(int(i) for i in obj["complement"])),
        )
        ppl = PplReport(
            log_ppl_full=decode_extended(obj["log_ppl"]["full"]),
            log_ppl_explanation=decode_extended(obj["log_ppl"]["explanation"]),
            log_ppl_complement=decode_extended(obj["log_ppl"]["complement"]),
            counterfactual_ok=bool(obj["constraints"]["counterfactual"]),
            factual_ok=bool(obj["constraints"]["factual"]),
            rational=bool(obj["rational"]),
            counterfactual_margin=decode_extended(obj["margins"]["counterfactual"]),
            factual_margin=decode_extended(obj["margins"]["factual"]),
        )
        wall = obj.get("wall_time_s")
        return SolveReport(
            solver=str(obj["solver"]),
            config=config,
            partition=partition,
            history_size=int(obj["history_size"]),
            size=int(obj["size"]),
            ppl=ppl,
            n_evaluations=int(obj["n_evaluations"]),
            wall_time_s=None if wall is None else float(wall),
            optimal=bool(obj["optimal"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed explain report: {exc}") from exc


def strip_timing_obj(obj: dict) -> dict:
    """Report object with the wall-clock field nulled (reproducible output)."""
    out = dict(obj)
    out["wall_time_s"] = None
    return out


def read_report(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("schema") != REPORT_SCHEMA:
        raise ValidationError(f"{path}: not an explain report (schema mismatch)")
    return obj
