import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ehd.errors import ValidationError
from ehd.estimators import HawkesProcessMLE, HistoryExplainer, PoissonProcessMLE
from ehd.fixtures import random_hawkes_instance
from ehd.models import HawkesExpModel, Prediction
from ehd.simulate import simulate
from ehd.solver import EhdConfig, greedy_solve

TRUE = HawkesExpModel(mu=np.array([0.3]), alpha=np.array([[0.4]]), beta=1.0)


@pytest.fixture(scope="module")
def dataset():
    return [simulate(TRUE, (0.0, 80.0), seed=30 + i, seq_id=f"s{i:02d}") for i in range(20)]


class TestHawkesProcessMLE:
    def test_get_params_round_trip(self):
        est = HawkesProcessMLE(mark_count=2, max_iter=50, tol=1e-5)
        params = est.get_params()
        assert params["mark_count"] == 2 and params["max_iter"] == 50
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_fit_sets_learned_attributes(self, dataset):
        est = HawkesProcessMLE().fit(dataset)
        assert est.model_.mark_count == 1
        assert est.mu_.shape == (1,)
        assert est.alpha_.shape == (1, 1)
        assert est.beta_ > 0
        assert est.converged_
        assert est.nll_ == est.diagnostics_.nll_final

    def test_mark_count_inferred_from_data(self, dataset):
        est = HawkesProcessMLE().fit(dataset)
        assert est.mark_count_ == 1

    def test_predict_returns_predictions(self, dataset):
        est = HawkesProcessMLE().fit(dataset)
        preds = est.predict(dataset[:3])
        assert len(preds) == 3
        assert all(isinstance(p, Prediction) for p in preds)
        for seq, pred in zip(dataset[:3], preds):
            assert pred.t_bar > seq.last_time

    def test_score_is_mean_loglik(self, dataset):
        est = HawkesProcessMLE().fit(dataset)
        empty = lambda s: type(s)((), s.t0, s.t0)
        manual = -np.mean([est.model_.sequence_nll(empty(s), s) for s in dataset])
        assert est.score(dataset) == pytest.approx(manual, rel=1e-12)

    def test_unfitted_predict_raises(self, dataset):
        with pytest.raises(NotFittedError):
            HawkesProcessMLE().predict(dataset)

    def test_bad_input_rejected(self):
        with pytest.raises(ValidationError, match="EventSequence"):
            HawkesProcessMLE().fit(["nope"])  # type: ignore[list-item]


class TestPoissonProcessMLE:
    def test_closed_form_fit(self, dataset):
        est = PoissonProcessMLE().fit(dataset)
        events = sum(len(s) for s in dataset)
        assert est.mu_[0] == pytest.approx(events / (20 * 80.0), rel=1e-12)

    def test_score_below_hawkes_on_hawkes_data(self, dataset):
        hawkes = HawkesProcessMLE().fit(dataset)
        poisson = PoissonProcessMLE().fit(dataset)
        assert hawkes.score(dataset) > poisson.score(dataset)


class TestHistoryExplainer:
    def test_explain_matches_direct_solver_call(self):
        model, inst = random_hawkes_instance(3)
        explainer = HistoryExplainer(solver="greedy", epsilon_d=0.9, epsilon_l=0.5)
        via_estimator = explainer.explain(model, inst)
        direct = greedy_solve(model, inst, EhdConfig(0.9, 0.5))
        assert via_estimator.partition == direct.partition
        assert via_estimator.ppl == direct.ppl

    def test_get_params_and_clone(self):
        explainer = HistoryExplainer(solver="brute", epsilon_d=0.95, epsilon_l=0.4)
        again = clone(explainer)
        assert again.get_params() == explainer.get_params()

    def test_threshold_validation_happens_at_explain(self):
        model, inst = random_hawkes_instance(0)
        bad = HistoryExplainer(epsilon_d=0.4, epsilon_l=0.5)
        with pytest.raises(ValidationError, match="exceed"):
            bad.explain(model, inst)
