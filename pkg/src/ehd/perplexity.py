"""Perplexity of a target sequence conditioned on a history subset.

Each target event ``x_i`` is scored by the model's next-event density given
the retained history events followed by the earlier target events
``x_{<i}``; the log-perplexity is the negative mean of those log-densities
and the perplexity is its exponential.

Conventions:

* An empty conditioning subset has infinite perplexity. (Retaining nothing
  explains nothing; this is also what makes the constrained explanation
  problem solvable for every threshold pair, since pushing all events into
  the explanation empties the complement.)
* Densities carry implicit 1/time units, so perplexity values are not
  dimensionless and may be below 1. All decisions downstream use
  log-perplexity differences, which are invariant under rescaling time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .events import Event, EventSequence, IndexSubset, Instance
from .models import MtppModel

__all__ = [
    "LogPpl",
    "PerplexityEvaluator",
    "log_perplexity",
    "perplexity",
    "concat_conditioning",
]

# Subset results are memoized by bitmask; histories longer than this use an
# uncached path to keep keys within a machine word.
MEMO_MAX_HISTORY = 64


@dataclass(frozen=True)
class LogPpl:
    """Log-perplexity value plus the per-event log-densities behind it.

    ``value`` is ``+inf`` exactly when the conditioning subset is empty or
    some per-event density is zero; ``per_event`` is empty in the former case.
    """

    value: float
    per_event: tuple[float, ...]


def _safe_exp(x: float) -> float:
    # exp without OverflowError; large finite log-perplexities saturate to inf
    if x > 709.0:
        return math.inf
    return math.exp(x)


class PerplexityEvaluator:
    """Memoizing evaluator bound to one (model, instance) pair.

    Read-only over its inputs; the memo table may be shared across threads
    (results are pure, so concurrent insertions of the same key agree).
    """

    def __init__(self, model: MtppModel, instance: Instance):
        self._model = model
        self._instance = instance
        self._n = len(instance.history)
        self._memo: dict[int, LogPpl] | None = {} if self._n <= MEMO_MAX_HISTORY else None
        max_mark = instance.max_mark()
        if max_mark >= model.mark_count:
            raise ValidationError(
                f"instance uses mark {max_mark} but the model has {model.mark_count} marks"
            )

    @property
    def model(self) -> MtppModel:
        return self._model

    @property
    def instance(self) -> Instance:
        return self._instance

    @property
    def history_size(self) -> int:
        return self._n

    def _compute(self, subset: IndexSubset) -> LogPpl:
        if len(subset) == 0:
            return LogPpl(value=math.inf, per_event=())
        history = self._instance.history
        target = self._instance.target
        model = self._model
        conditioning: list[Event] = [history.events[i] for i in subset.indices]
        terms: list[float] = []
        for ev in target.events:
            t_l = conditioning[-1].time
            lam = float(model._intensity_vector(conditioning, ev.time)[ev.mark])
            if lam <= 0.0:
                terms.append(-math.inf)
            else:
                comp = model._compensator(conditioning, t_l, ev.time)
                terms.append(math.log(lam) - comp)
            conditioning.append(ev)
        total = 0.0
        for term in terms:
            total += term
        if math.isinf(total):
            value = math.inf
        else:
            value = -total / len(terms)
        return LogPpl(value=value, per_event=tuple(terms))

    def log_perplexity(self, subset: IndexSubset) -> LogPpl:
        subset.validate_for(self._n)
        if self._memo is None:
            return self._compute(subset)
        key = subset.mask
        hit = self._memo.get(key)
        if hit is None:
            hit = self._compute(subset)
            self._memo[key] = hit
        return hit

    def perplexity(self, subset: IndexSubset) -> float:
        return _safe_exp(self.log_perplexity(subset).value)

    def log_perplexity_full(self) -> LogPpl:
        return self.log_perplexity(IndexSubset.full(self._n))


def log_perplexity(model: MtppModel, instance: Instance, subset: IndexSubset) -> LogPpl:
    """One-shot log-perplexity of the target given a history subset."""
    return PerplexityEvaluator(model, instance).log_perplexity(subset)


def perplexity(model: MtppModel, instance: Instance, subset: IndexSubset) -> float:
    """One-shot perplexity; ``exp`` of :func:`log_perplexity`, ``+inf`` propagates."""
    return PerplexityEvaluator(model, instance).perplexity(subset)


def concat_conditioning(history_subset: EventSequence, prefix: tuple[Event, ...]) -> EventSequence:
    """History subset followed by already-seen target events, as one sequence."""
    events = history_subset.events + prefix
    t_end = events[-1].time if events else history_subset.t_end
    return EventSequence(
        events=events, t0=history_subset.t0, t_end=max(t_end, history_subset.t_end)
    )
