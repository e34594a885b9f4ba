import math

import numpy as np
import pytest

from conftest import make_instance
from ehd.errors import ValidationError
from ehd.events import Event, EventSequence, IndexSubset, Instance, subset
from ehd.models import HawkesExpModel, PoissonModel
from ehd.perplexity import (
    PerplexityEvaluator,
    concat_conditioning,
    log_perplexity,
    perplexity,
)


class TestLogPerplexity:
    def test_single_event_density_e_minus_one(self, poisson1):
        # one target at t=1 after conditioning event at t=0: density e^-1
        inst = make_instance([0.0], [1.0])
        result = log_perplexity(poisson1, inst, IndexSubset((0,)))
        assert result.value == pytest.approx(1.0, rel=1e-12)
        assert result.per_event == pytest.approx((-1.0,), rel=1e-12)
        assert perplexity(poisson1, inst, IndexSubset((0,))) == pytest.approx(
            2.718281828459045, rel=1e-12
        )

    def test_two_unit_gaps_give_e(self, poisson1):
        inst = make_instance([0.0], [1.0, 2.0])
        assert perplexity(poisson1, inst, IndexSubset((0,))) == pytest.approx(
            math.e, rel=1e-12
        )

    def test_empty_subset_is_infinite(self, poisson1):
        inst = make_instance([0.0], [1.0])
        result = log_perplexity(poisson1, inst, IndexSubset())
        assert result.value == math.inf
        assert result.per_event == ()
        assert perplexity(poisson1, inst, IndexSubset()) == math.inf

    def test_constant_density_gives_reciprocal(self):
        # all per-event densities p  =>  ppl = 1/p
        model = PoissonModel(mu=np.array([2.0]))
        inst = make_instance([0.0], [0.5, 1.0, 1.5])
        p = 2.0 * math.exp(-2.0 * 0.5)
        assert perplexity(model, inst, IndexSubset((0,))) == pytest.approx(
            1.0 / p, rel=1e-12
        )

    def test_zero_density_event_is_infinite(self):
        model = PoissonModel(mu=np.array([0.5, 0.0]))
        inst = make_instance([0.0], [1.0], history_marks=[0], target_marks=[1])
        result = log_perplexity(model, inst, IndexSubset((0,)))
        assert result.value == math.inf
        assert result.per_event == (-math.inf,)

    def test_terms_match_event_loglik(self, hawkes1):
        # per-event terms are the model's incremental next-event logliks
        inst = make_instance([0.2, 0.8], [1.5, 2.5, 3.0])
        sel = IndexSubset((1,))
        result = log_perplexity(hawkes1, inst, sel)
        kept = subset(inst.history, sel)
        for i, ev in enumerate(inst.target.events):
            cond = concat_conditioning(kept, inst.target.events[:i])
            assert result.per_event[i] == hawkes1.event_loglik(cond, ev)

    def test_full_subset_matches_whole_history(self, hawkes1):
        inst = make_instance([0.2, 0.8, 1.1], [1.5, 2.5])
        ev = PerplexityEvaluator(hawkes1, inst)
        assert (
            ev.log_perplexity(IndexSubset.full(3)).value
            == ev.log_perplexity_full().value
        )

    def test_zero_influence_removal_leaves_value(self):
        # mark 1 has an all-zero outgoing row and is not last in the subset
        model = HawkesExpModel(
            mu=np.array([0.2, 0.3]),
            alpha=np.array([[0.5, 0.3], [0.0, 0.0]]),
            beta=1.0,
        )
        inst = make_instance(
            [0.2, 0.5, 1.0], [2.0, 2.6], history_marks=[0, 1, 0], target_marks=[0, 1]
        )
        with_zero = log_perplexity(model, inst, IndexSubset((0, 1, 2))).value
        without = log_perplexity(model, inst, IndexSubset((0, 2))).value
        assert with_zero == pytest.approx(without, rel=1e-12)


class TestEvaluator:
    def test_memoized_and_cold_agree_bitwise(self, hawkes1):
        inst = make_instance([0.2, 0.8, 1.1], [1.5, 2.5])
        ev = PerplexityEvaluator(hawkes1, inst)
        sel = IndexSubset((0, 2))
        warm = ev.log_perplexity(sel)
        again = ev.log_perplexity(sel)
        cold = PerplexityEvaluator(hawkes1, inst).log_perplexity(sel)
        assert warm is again  # served from the memo
        assert warm.value == cold.value
        assert warm.per_event == cold.per_event

    def test_mark_count_mismatch_rejected(self, poisson1):
        inst = make_instance([0.0], [1.0], history_marks=[0], target_marks=[3])
        with pytest.raises(ValidationError, match="mark 3"):
            PerplexityEvaluator(poisson1, inst)

    def test_subset_validated_against_history(self, poisson1):
        inst = make_instance([0.0], [1.0])
        with pytest.raises(ValidationError, match="out of range"):
            PerplexityEvaluator(poisson1, inst).log_perplexity(IndexSubset((5,)))


class TestUnitRescaling:
    def test_log_perplexity_shifts_by_log_c(self):
        # t -> c t, mu -> mu/c, beta -> beta/c leaves alpha alone and shifts
        # every subset's log-perplexity by exactly +log c
        c = 3.7
        model = HawkesExpModel(
            mu=np.array([0.3, 0.2]),
            alpha=np.array([[0.4, 0.1], [0.2, 0.3]]),
            beta=1.1,
        )
        scaled_model = HawkesExpModel(
            mu=model.mu / c, alpha=model.alpha.copy(), beta=model.beta / c
        )
        inst = make_instance(
            [0.2, 0.9, 1.4], [2.0, 2.8], history_marks=[0, 1, 0], target_marks=[1, 0]
        )

        def scale_seq(s):
            return EventSequence(
                tuple(Event(e.mark, e.time * c) for e in s.events), s.t0 * c, s.t_end * c
            )

        scaled = Instance(scale_seq(inst.history), scale_seq(inst.target))
        ev = PerplexityEvaluator(model, inst)
        sev = PerplexityEvaluator(scaled_model, scaled)
        for mask in range(1, 8):
            sel = IndexSubset.from_mask(mask)
            base = ev.log_perplexity(sel).value
            shifted = sev.log_perplexity(sel).value
            assert shifted - base == pytest.approx(math.log(c), abs=1e-9)
