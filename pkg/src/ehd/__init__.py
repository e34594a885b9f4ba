"""Minimal rational history explanations for marked temporal point processes.

Given a black-box next-event model and an event sequence split into history
and target, this package finds the smallest subset of history events that
keeps the model's predictive accuracy close to the full-history level while
the discarded remainder alone degrades it, so the kept subset always
out-predicts what was dropped. It ships exponential-kernel Hawkes and
homogeneous Poisson models, simulation and maximum-likelihood fitting,
perplexity-based constraint evaluation, exact and heuristic solvers with
single-constraint baselines, scikit-learn style estimator wrappers, and a
benchmarking CLI.
"""

from .errors import NumericalError, ValidationError
from .estimators import HawkesProcessMLE, HistoryExplainer, PoissonProcessMLE
from .events import (
    Event,
    EventSequence,
    IndexSubset,
    Instance,
    split_instance,
    subset,
    validate_sequence,
)
from .fitting import FitConfig, fit_mle, fit_poisson, nll_objective
from .models import HawkesExpModel, MtppModel, PoissonModel, Prediction, dump_model, load_model
from .perplexity import LogPpl, PerplexityEvaluator, log_perplexity, perplexity
from .simulate import PlantedInstance, make_planted_instance, simulate, time_rescale
from .solver import (
    EhdConfig,
    Partition,
    PplReport,
    SolveReport,
    brute_force_solve,
    ca_only_solve,
    evaluate_partition,
    fa_only_solve,
    greedy_solve,
    is_rational,
    local_search_solve,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventSequence",
    "Instance",
    "IndexSubset",
    "validate_sequence",
    "split_instance",
    "subset",
    "MtppModel",
    "HawkesExpModel",
    "PoissonModel",
    "Prediction",
    "load_model",
    "dump_model",
    "simulate",
    "time_rescale",
    "PlantedInstance",
    "make_planted_instance",
    "FitConfig",
    "fit_mle",
    "fit_poisson",
    "nll_objective",
    "LogPpl",
    "PerplexityEvaluator",
    "log_perplexity",
    "perplexity",
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
    "HawkesProcessMLE",
    "PoissonProcessMLE",
    "HistoryExplainer",
    "ValidationError",
    "NumericalError",
    "__version__",
]
