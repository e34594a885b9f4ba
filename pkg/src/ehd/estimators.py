"""Scikit-learn style wrappers around the fitting and explanation cores.

Estimators follow the usual conventions: constructor arguments are stored
verbatim (so ``get_params`` / ``set_params`` / ``clone`` work), all learned
state lives in trailing-underscore attributes set by ``fit``, and ``X`` is a
list of :class:`~ehd.events.EventSequence` rather than a 2-D array.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .events import EventSequence, Instance
from .fitting import FitConfig, fit_mle, fit_poisson
from .models import MtppModel, Prediction
from .perplexity import PerplexityEvaluator
from .solver import (
    DEFAULT_BRUTE_FORCE_CAP,
    DEFAULT_LOCAL_SEARCH_BUDGET,
    EhdConfig,
    SolveReport,
    solve,
)
from .validation import check_event_sequences, check_instance, infer_mark_count

__all__ = ["HawkesProcessMLE", "PoissonProcessMLE", "HistoryExplainer"]


class _MtppEstimatorMixin:
    model_: MtppModel

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet; call fit first."
            )

    def predict(self, X: list[EventSequence]) -> list[Prediction]:
        """Next-event prediction (expected time, most probable mark) per
        conditioning sequence."""
        self._check_fitted()
        seqs = check_event_sequences(X, self.model_.mark_count)
        return [self.model_.predict_next(seq) for seq in seqs]

    def score(self, X: list[EventSequence], y=None) -> float:
        """Mean log-likelihood per sequence (higher is better)."""
        self._check_fitted()
        seqs = check_event_sequences(X, self.model_.mark_count)
        empty = lambda s: EventSequence((), s.t0, s.t0)
        return -float(
            np.mean([self.model_.sequence_nll(empty(s), s) for s in seqs])
        )


class HawkesProcessMLE(_MtppEstimatorMixin, BaseEstimator):
    """Maximum-likelihood exponential-kernel Hawkes estimator.

    Parameters
    ----------
    mark_count : int or None
        Number of marks; inferred from the data when None.
    max_iter, tol : optimizer controls (quasi-Newton in log-parameter space).
    init : "empirical" or "random" initialization strategy.
    alpha_init, beta_init : starting excitation and decay values.
    seed : jitter seed for the random initialization strategy.
    """

    def __init__(
        self,
        mark_count: int | None = None,
        max_iter: int = 200,
        tol: float = 1e-6,
        init: str = "empirical",
        alpha_init: float = 0.1,
        beta_init: float = 1.0,
        seed: int = 0,
    ):
        self.mark_count = mark_count
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.alpha_init = alpha_init
        self.beta_init = beta_init
        self.seed = seed

    def fit(self, X: list[EventSequence], y=None) -> "HawkesProcessMLE":
        seqs = check_event_sequences(X, self.mark_count)
        m_count = self.mark_count if self.mark_count is not None else infer_mark_count(seqs)
        config = FitConfig(
            max_iterations=self.max_iter,
            gradient_tolerance=self.tol,
            init=self.init,
            alpha_init=self.alpha_init,
            beta_init=self.beta_init,
        )
        model, diag = fit_mle(seqs, m_count, config, seed=self.seed)
        self.model_ = model
        self.mu_ = model.mu
        self.alpha_ = model.alpha
        self.beta_ = model.beta
        self.mark_count_ = m_count
        self.nll_ = diag.nll_final
        self.n_iter_ = diag.iterations
        self.converged_ = diag.converged
        self.diagnostics_ = diag
        return self


class PoissonProcessMLE(_MtppEstimatorMixin, BaseEstimator):
    """Closed-form homogeneous Poisson estimator (count over observed time)."""

    def __init__(self, mark_count: int | None = None):
        self.mark_count = mark_count

    def fit(self, X: list[EventSequence], y=None) -> "PoissonProcessMLE":
        seqs = check_event_sequences(X, self.mark_count)
        m_count = self.mark_count if self.mark_count is not None else infer_mark_count(seqs)
        model, diag = fit_poisson(seqs, m_count)
        self.model_ = model
        self.mu_ = model.mu
        self.mark_count_ = m_count
        self.nll_ = diag.nll_final
        self.diagnostics_ = diag
        return self


class HistoryExplainer(BaseEstimator):
    """Parameterized explainer: minimal rational history subset for a model.

    Not a learner; it subclasses ``BaseEstimator`` for ``get_params`` /
    ``set_params`` / cloning so explainer configurations compose with
    scikit-learn tooling. ``explain`` consumes a fitted (or hand-built)
    model plus an instance and returns the solver report.
    """

    def __init__(
        self,
        solver: str = "greedy",
        epsilon_d: float = 0.9,
        epsilon_l: float = 0.5,
        budget: int = DEFAULT_LOCAL_SEARCH_BUDGET,
        cap: int = DEFAULT_BRUTE_FORCE_CAP,
    ):
        self.solver = solver
        self.epsilon_d = epsilon_d
        self.epsilon_l = epsilon_l
        self.budget = budget
        self.cap = cap

    def explain(self, model: MtppModel, instance: Instance) -> SolveReport:
        check_instance(instance)
        config = EhdConfig(epsilon_d=self.epsilon_d, epsilon_l=self.epsilon_l)
        evaluator = PerplexityEvaluator(model, instance)
        return solve(
            self.solver,
            model,
            instance,
            config,
            budget=self.budget,
            cap=self.cap,
            evaluator=evaluator,
        )
