"""Minimal rational history explanations as constrained subset search.

Given a model, an instance, and thresholds ``0 < epsilon_l < epsilon_d < 1``,
an explanation is a subset of history events (the rest is its complement)
subject to two log-perplexity constraints against the full history:

* counterfactual: ``log ppl(full) - log ppl(complement) <= log epsilon_l``
  (dropping the explanation must degrade prediction),
* factual: ``log ppl(full) - log ppl(explanation) >= log epsilon_d``
  (the explanation alone must preserve prediction).

A partition satisfying both is feasible, and feasibility forces rationality:
``log ppl(complement) - log ppl(explanation) >= log(epsilon_d / epsilon_l)
> 0``, so the explanation always predicts strictly better than what was
discarded. The problem is solvable for every valid threshold pair because
the full-history explanation leaves an empty complement, whose perplexity is
infinite by convention.

Solvers: an exact oracle enumerating subsets by cardinality then ascending
bitmask, a greedy backward elimination, a local search refining the greedy
answer, and two single-constraint baselines (factual-only, counterfactual-
only) that demonstrate how one-sided definitions can return irrational
explanations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Iterator

from .errors import ValidationError
from .events import IndexSubset, Instance
from .models import MtppModel
from .perplexity import PerplexityEvaluator

__all__ = [
    "EhdConfig",
    "Partition",
    "PplReport",
    "SolveReport",
    "evaluate_partition",
    "is_rational",
    "brute_force_solve",
    "greedy_solve",
    "local_search_solve",
    "fa_only_solve",
    "ca_only_solve",
    "solve",
    "strip_timing",
    "SOLVER_NAMES",
    "DEFAULT_BRUTE_FORCE_CAP",
    "DEFAULT_LOCAL_SEARCH_BUDGET",
]

DEFAULT_BRUTE_FORCE_CAP = 22
DEFAULT_LOCAL_SEARCH_BUDGET = 2000

SOLVER_NAMES = ("brute", "greedy", "local", "fa-only", "ca-only")


@dataclass(frozen=True)
class EhdConfig:
    """Thresholds for the two constraints; requires ``epsilon_l < epsilon_d``.

    ``slack`` loosens both constraints by an additive amount in log space
    (default 0: exact floating comparisons, kept for numerical-edge
    investigation only).
    """

    epsilon_d: float = 0.9
    epsilon_l: float = 0.5
    slack: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon_l < 1.0) or not (0.0 < self.epsilon_d < 1.0):
            raise ValidationError("epsilon_d and epsilon_l must lie in (0, 1)")
        if self.epsilon_d <= self.epsilon_l:
            raise ValidationError(
                f"epsilon_d ({self.epsilon_d}) must exceed epsilon_l ({self.epsilon_l})"
            )
        if self.slack < 0.0:
            raise ValidationError("slack must be nonnegative")

    @property
    def log_epsilon_d(self) -> float:
        return math.log(self.epsilon_d)

    @property
    def log_epsilon_l(self) -> float:
        return math.log(self.epsilon_l)


@dataclass(frozen=True)
class Partition:
    """Disjoint split of all history positions into explanation + complement."""

    explanation: IndexSubset
    complement: IndexSubset

    @classmethod
    def from_explanation(cls, explanation: IndexSubset, history_size: int) -> "Partition":
        return cls(explanation=explanation, complement=explanation.complement(history_size))

    def validate_for(self, history_size: int) -> None:
        self.explanation.validate_for(history_size)
        self.complement.validate_for(history_size)
        if set(self.explanation.indices) & set(self.complement.indices):
            raise ValidationError("explanation and complement must be disjoint")
        if len(self.explanation) + len(self.complement) != history_size:
            raise ValidationError("explanation and complement must cover all history positions")

    @property
    def size(self) -> int:
        return len(self.explanation)


@dataclass(frozen=True)
class PplReport:
    """Constraint evaluation of one partition at one threshold pair.

    Margins are slack in log space: nonnegative exactly when the
    corresponding constraint holds.
    """

    log_ppl_full: float
    log_ppl_explanation: float
    log_ppl_complement: float
    counterfactual_ok: bool
    factual_ok: bool
    rational: bool
    counterfactual_margin: float
    factual_margin: float

    @property
    def feasible(self) -> bool:
        return self.counterfactual_ok and self.factual_ok


@dataclass(frozen=True)
class SolveReport:
    """Solver output: chosen partition, its evaluation, and provenance."""

    solver: str
    config: EhdConfig
    partition: Partition
    history_size: int
    size: int
    ppl: PplReport
    n_evaluations: int
    wall_time_s: float | None
    optimal: bool


def evaluate_partition(
    model: MtppModel,
    instance: Instance,
    partition: Partition,
    config: EhdConfig,
    evaluator: PerplexityEvaluator | None = None,
) -> PplReport:
    """Evaluates both constraints and rationality for a partition."""
    ev = evaluator if evaluator is not None else PerplexityEvaluator(model, instance)
    partition.validate_for(ev.history_size)
    return _evaluate(ev, partition, config)


def _evaluate(ev: PerplexityEvaluator, partition: Partition, config: EhdConfig) -> PplReport:
    lf = ev.log_perplexity_full().value
    ld = ev.log_perplexity(partition.explanation).value
    ll = ev.log_perplexity(partition.complement).value
    # +inf - +inf yields nan; nan comparisons are False, so a degenerate
    # model that zeroes the full-history density makes every partition
    # infeasible rather than raising here.
    counterfactual_margin = (config.log_epsilon_l + config.slack) - (lf - ll)
    factual_margin = (lf - ld) - (config.log_epsilon_d - config.slack)
    c_ok = bool(lf - ll <= config.log_epsilon_l + config.slack)
    f_ok = bool(lf - ld >= config.log_epsilon_d - config.slack)
    return PplReport(
        log_ppl_full=lf,
        log_ppl_explanation=ld,
        log_ppl_complement=ll,
        counterfactual_ok=c_ok,
        factual_ok=f_ok,
        rational=bool(ld < ll),
        counterfactual_margin=counterfactual_margin,
        factual_margin=factual_margin,
    )


def is_rational(report: PplReport) -> bool:
    """Strict comparison: the explanation must out-predict the complement."""
    return report.rational


def _iter_masks_by_cardinality(n: int) -> Iterator[int]:
    # Cardinality ascending; within a cardinality, ascending bitmask value
    # (Gosper's hack enumerates same-popcount masks in increasing order).
    yield 0
    limit = 1 << n
    for k in range(1, n + 1):
        mask = (1 << k) - 1
        while mask < limit:
            yield mask
            low = mask & -mask
            ripple = mask + low
            mask = (((mask ^ ripple) >> 2) // low) | ripple


class _Search:
    """Shared bookkeeping: evaluation counting over one evaluator."""

    def __init__(
        self,
        model: MtppModel,
        instance: Instance,
        config: EhdConfig,
        evaluator: PerplexityEvaluator | None,
    ):
        self.evaluator = evaluator if evaluator is not None else PerplexityEvaluator(model, instance)
        self.config = config
        self.n = self.evaluator.history_size
        self.n_evaluations = 0

    def evaluate(self, partition: Partition) -> PplReport:
        self.n_evaluations += 1
        return _evaluate(self.evaluator, partition, self.config)

    def partition(self, explanation: IndexSubset) -> Partition:
        return Partition.from_explanation(explanation, self.n)

    def report(
        self,
        solver: str,
        partition: Partition,
        ppl: PplReport,
        started: float,
        optimal: bool,
    ) -> SolveReport:
        return SolveReport(
            solver=solver,
            config=self.config,
            partition=partition,
            history_size=self.n,
            size=partition.size,
            ppl=ppl,
            n_evaluations=self.n_evaluations,
            wall_time_s=time.perf_counter() - started,
            optimal=optimal,
        )


def _enumerate_minimal(
    search: _Search, accept, solver: str, started: float, optimal: bool
) -> SolveReport:
    for mask in _iter_masks_by_cardinality(search.n):
        part = search.partition(IndexSubset.from_mask(mask))
        rep = search.evaluate(part)
        if accept(rep):
            return search.report(solver, part, rep, started, optimal)
    raise ValidationError(
        "no feasible partition exists: the model assigns zero density to the "
        "target under the full history (degenerate model/instance pair)"
    )


def _check_cap(n: int, cap: int, solver: str) -> None:
    if n > cap:
        raise ValidationError(
            f"history has {n} events, above the exhaustive cap {cap} for "
            f"'{solver}'; use the greedy or local-search solvers"
        )


def brute_force_solve(
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Exact oracle: smallest feasible explanation, ties to lowest bitmask.

    Always terminates with a feasible partition (in the worst case the full
    history, whose empty complement has infinite perplexity).
    """
    started = time.perf_counter()
    search = _Search(model, instance, config, evaluator)
    _check_cap(search.n, cap, "brute")
    return _enumerate_minimal(search, lambda rep: rep.feasible, "brute", started, optimal=True)


def greedy_solve(
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Backward elimination from the full history.

    Repeatedly removes the event whose removal keeps the partition feasible
    and maximizes the remaining factual margin (ties to the lowest index),
    stopping when no single removal preserves feasibility. The result is
    always feasible and deterministic.
    """
    started = time.perf_counter()
    search = _Search(model, instance, config, evaluator)
    current = search.partition(IndexSubset.full(search.n))
    current_rep = search.evaluate(current)
    if not current_rep.feasible:
        raise ValidationError(
            "full-history partition is infeasible: the model assigns zero "
            "density to the target under the full history"
        )
    while len(current.explanation) > 0:
        best_idx = None
        best_rep = None
        best_part = None
        for i in current.explanation.indices:
            cand = search.partition(
                IndexSubset(tuple(j for j in current.explanation.indices if j != i))
            )
            rep = search.evaluate(cand)
            if rep.feasible and (best_rep is None or rep.factual_margin > best_rep.factual_margin):
                best_idx, best_rep, best_part = i, rep, cand
        if best_idx is None:
            break
        current, current_rep = best_part, best_rep
    return search.report("greedy", current, current_rep, started, optimal=False)


def _min_margin(rep: PplReport) -> float:
    return min(rep.counterfactual_margin, rep.factual_margin)


def local_search_solve(
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    budget: int = DEFAULT_LOCAL_SEARCH_BUDGET,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Greedy start, then first-improvement moves under an evaluation budget.

    Scans removals (explanation to complement) and swaps in ascending index
    order, accepting any feasible strictly smaller partition, or an
    equal-size partition with a strictly larger minimum margin. ``budget``
    caps the number of candidate evaluations in this refinement phase; the
    greedy result is returned unchanged if the budget runs out first.
    """
    if budget < 1:
        raise ValidationError("local search budget must be >= 1")
    started = time.perf_counter()
    search = _Search(model, instance, config, evaluator)
    seed_report = greedy_solve(model, instance, config, evaluator=search.evaluator)
    search.n_evaluations = seed_report.n_evaluations
    current, current_rep = seed_report.partition, seed_report.ppl
    used = 0
    improved = True
    while improved and used < budget:
        improved = False
        for i in current.explanation.indices:
            if used >= budget:
                break
            cand = search.partition(
                IndexSubset(tuple(j for j in current.explanation.indices if j != i))
            )
            used += 1
            rep = search.evaluate(cand)
            if rep.feasible:
                current, current_rep = cand, rep
                improved = True
                break
        if improved or used >= budget:
            continue
        for i in current.explanation.indices:
            for j in current.complement.indices:
                if used >= budget:
                    break
                kept = tuple(sorted((set(current.explanation.indices) - {i}) | {j}))
                cand = search.partition(IndexSubset(kept))
                used += 1
                rep = search.evaluate(cand)
                if rep.feasible and _min_margin(rep) > _min_margin(current_rep):
                    current, current_rep = cand, rep
                    improved = True
                    break
            if improved or used >= budget:
                break
    return search.report("local", current, current_rep, started, optimal=False)


def fa_only_solve(
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Factual-only baseline: smallest subset preserving prediction accuracy.

    Enforces only the factual constraint; the report still records both
    constraints and rationality, which is how this baseline is shown to
    return irrational explanations. Falls back to backward elimination when
    the history exceeds the exhaustive cap.
    """
    started = time.perf_counter()
    search = _Search(model, instance, config, evaluator)
    if search.n <= cap:
        return _enumerate_minimal(
            search, lambda rep: rep.factual_ok, "fa-only", started, optimal=False
        )
    return _greedy_single_constraint(
        search, lambda rep: rep.factual_ok, "fa-only", started
    )


def ca_only_solve(
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Counterfactual-only baseline: smallest removal that degrades prediction.

    The perturbation distance is the number of removed events, so this
    minimizes the explanation size subject to the counterfactual constraint
    alone; rationality of the result is recorded, not enforced.
    """
    started = time.perf_counter()
    search = _Search(model, instance, config, evaluator)
    if search.n <= cap:
        return _enumerate_minimal(
            search, lambda rep: rep.counterfactual_ok, "ca-only", started, optimal=False
        )
    return _greedy_single_constraint(
        search, lambda rep: rep.counterfactual_ok, "ca-only", started
    )


def _greedy_single_constraint(search: _Search, accept, solver: str, started: float) -> SolveReport:
    current = search.partition(IndexSubset.full(search.n))
    current_rep = search.evaluate(current)
    if not accept(current_rep):
        raise ValidationError(
            "full-history partition violates the baseline constraint "
            "(degenerate model/instance pair)"
        )
    while len(current.explanation) > 0:
        best = None
        for i in current.explanation.indices:
            cand = search.partition(
                IndexSubset(tuple(j for j in current.explanation.indices if j != i))
            )
            rep = search.evaluate(cand)
            if accept(rep) and (best is None or rep.factual_margin > best[1].factual_margin):
                best = (cand, rep)
        if best is None:
            break
        current, current_rep = best
    return search.report(solver, current, current_rep, started, optimal=False)


def solve(
    solver: str,
    model: MtppModel,
    instance: Instance,
    config: EhdConfig,
    budget: int = DEFAULT_LOCAL_SEARCH_BUDGET,
    cap: int = DEFAULT_BRUTE_FORCE_CAP,
    evaluator: PerplexityEvaluator | None = None,
) -> SolveReport:
    """Dispatch by solver name (one of ``SOLVER_NAMES``)."""
    if solver == "brute":
        return brute_force_solve(model, instance, config, cap=cap, evaluator=evaluator)
    if solver == "greedy":
        return greedy_solve(model, instance, config, evaluator=evaluator)
    if solver == "local":
        return local_search_solve(model, instance, config, budget=budget, evaluator=evaluator)
    if solver == "fa-only":
        return fa_only_solve(model, instance, config, cap=cap, evaluator=evaluator)
    if solver == "ca-only":
        return ca_only_solve(model, instance, config, cap=cap, evaluator=evaluator)
    raise ValidationError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")


def strip_timing(report: SolveReport) -> SolveReport:
    """Copy of the report without the wall-clock field (the only
    non-deterministic part)."""
    return replace(report, wall_time_s=None)
