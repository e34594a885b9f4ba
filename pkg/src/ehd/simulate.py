"""Synthetic data: thinning simulation, residual diagnostics, planted instances.

Simulation uses Ogata-style thinning. For the exponential-kernel Hawkes
process (and trivially for Poisson) the total intensity is non-increasing
between events, so the intensity evaluated just after the current time is a
valid rejection bound; the bound is refreshed at every accepted or rejected
candidate.

All randomness is drawn from a seeded NumPy PCG64 generator, consumed only
as uniform doubles and transformed explicitly, so outputs are reproducible
across platforms for a fixed NumPy version.

Planted instances embed a known ground truth: a subset of marks is made
non-influential by zeroing its outgoing branching-ratio rows, so those
events provably contribute nothing to any prediction, and the influential
history events are the construction's ground-truth explanation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .events import Event, EventSequence, IndexSubset, Instance
from .models import HawkesExpModel, MtppModel, PoissonModel
from .perplexity import PerplexityEvaluator

__all__ = [
    "simulate",
    "time_rescale",
    "PlantedInstance",
    "make_planted_instance",
    "DEFAULT_MAX_EVENTS",
]

DEFAULT_MAX_EVENTS = 1_000_000


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _uniform(rng: np.random.Generator) -> float:
    return float(rng.random())


def _exponential(rng: np.random.Generator, rate: float) -> float:
    # inverse-CDF transform of a uniform draw; 1 - u lies in (0, 1]
    u = _uniform(rng)
    return -math.log1p(-u) / rate


class _ThinningState:
    """Decayed per-source-mark excitation sums, advanced incrementally.

    The exponential kernel makes the intensity Markov in these sums, so one
    O(M) update per candidate replaces a scan over the whole past.
    """

    def __init__(self, model: MtppModel):
        self.model = model
        if isinstance(model, HawkesExpModel):
            self.r = np.zeros(model.mark_count)
            self.row = model.row_sums()

    def advance(self, dt: float) -> None:
        if isinstance(self.model, HawkesExpModel) and dt > 0.0:
            self.r *= math.exp(-self.model.beta * dt)

    def record(self, mark: int) -> None:
        if isinstance(self.model, HawkesExpModel):
            self.r[mark] += 1.0

    def intensity_vector(self) -> np.ndarray:
        model = self.model
        if isinstance(model, PoissonModel):
            return model.mu.copy()
        assert isinstance(model, HawkesExpModel)
        return model.mu + model.beta * (model.alpha.T @ self.r)

    def total_intensity(self) -> float:
        return float(np.sum(self.intensity_vector()))


def simulate(
    model: MtppModel,
    window: tuple[float, float],
    seed: int,
    max_events: int = DEFAULT_MAX_EVENTS,
    seq_id: str | None = None,
) -> EventSequence:
    """Sample one event sequence on ``window`` by thinning.

    Requires a stationary model (spectral radius of the branching matrix
    below 1) and errors out if the event-count cap is exceeded. Deterministic
    given ``seed``.
    """
    t0, t_end = float(window[0]), float(window[1])
    if not (math.isfinite(t0) and math.isfinite(t_end)) or t_end < t0:
        raise ValidationError(f"invalid simulation window [{t0}, {t_end}]")
    if isinstance(model, HawkesExpModel):
        rho = model.spectral_radius()
        if rho >= 1.0:
            raise ValidationError(
                f"cannot simulate a non-stationary model (spectral radius {rho:.4f} >= 1)"
            )
    elif not isinstance(model, PoissonModel):
        raise ValidationError(
            "simulate supports the exponential-kernel Hawkes and Poisson models only"
        )
    rng = _rng(seed)
    state = _ThinningState(model)
    events: list[Event] = []
    t = t0
    while True:
        # the current total intensity bounds the future one until the next
        # event, because the exponential kernel only decays in between
        bound = state.total_intensity()
        gap = _exponential(rng, bound)
        if gap <= 0.0:
            continue
        t = t + gap
        if t > t_end:
            break
        state.advance(gap)
        lam = state.intensity_vector()
        lam_total = float(np.sum(lam))
        if _uniform(rng) * bound <= lam_total:
            u_mark = _uniform(rng) * lam_total
            acc = 0.0
            mark = model.mark_count - 1
            for m in range(model.mark_count):
                acc += float(lam[m])
                if u_mark <= acc:
                    mark = m
                    break
            events.append(Event(mark=mark, time=t))
            state.record(mark)
            if len(events) > max_events:
                raise ValidationError(
                    f"simulation exceeded the event cap ({max_events}); "
                    "check stationarity or enlarge max_events"
                )
    return EventSequence(events=tuple(events), t0=t0, t_end=t_end, seq_id=seq_id)


def time_rescale(model: MtppModel, seq: EventSequence) -> list[float]:
    """Compensator increments between consecutive events.

    Under the true generating model these residuals are i.i.d. unit
    exponential, which is the basis of the goodness-of-fit checks.
    """
    residuals: list[float] = []
    prev = seq.t0
    for i, ev in enumerate(seq.events):
        residuals.append(model._compensator(seq.events[:i], prev, ev.time))
        prev = ev.time
    return residuals


@dataclass(frozen=True)
class PlantedInstance:
    """Instance with construction-time knowledge of the influential events."""

    model: HawkesExpModel
    instance: Instance
    ground_truth: IndexSubset

    def __post_init__(self) -> None:
        self.ground_truth.validate_for(len(self.instance.history))
        row = self.model.row_sums()
        for i, ev in enumerate(self.instance.history.events):
            influential = float(row[ev.mark]) > 0.0
            if influential != (i in self.ground_truth):
                raise ValidationError(
                    "ground truth must be exactly the history events whose marks "
                    "have a nonzero outgoing branching row"
                )


# Planted-generator constants: small baselines make excitation dominate the
# target scores, moderate branching keeps the process stationary while
# single-event removals still move the constraints.
_PLANT_MU = 0.05
_PLANT_RHO = 0.8
_PLANT_BETA = 1.0
# Realized candidates are accepted only when every influential history event
# is individually necessary at these thresholds (its lone removal already
# breaks feasibility), so the planted ground truth is irreducible.
_PLANT_EPS_D = 0.9
_PLANT_EPS_L = 0.5


def _planted_ok(model: HawkesExpModel, instance: Instance, ground_truth: IndexSubset) -> bool:
    import math as _math

    evaluator = PerplexityEvaluator(model, instance)
    n = len(instance.history)
    lf = evaluator.log_perplexity_full().value
    if not _math.isfinite(lf):
        return False
    log_eps_d = _math.log(_PLANT_EPS_D)
    log_eps_l = _math.log(_PLANT_EPS_L)
    for i in ground_truth.indices:
        kept = IndexSubset(tuple(j for j in range(n) if j != i))
        ld = evaluator.log_perplexity(kept).value
        ll = evaluator.log_perplexity(IndexSubset((i,))).value
        factual_ok = lf - ld >= log_eps_d
        counterfactual_ok = lf - ll <= log_eps_l
        if factual_ok and counterfactual_ok:
            return False
    return True


def make_planted_instance(
    mark_count: int,
    history_len: int,
    target_len: int,
    influence_fraction: float,
    seed: int,
    max_attempts: int = 200,
) -> PlantedInstance:
    """Build an instance whose rational explanation is known by construction.

    A random fraction of marks gets all-zero outgoing branching rows
    (non-influential); baselines are kept small so target events are driven
    by excitation from the influential history events. The model is sampled
    once, then sequences are simulated (with growing windows and derived
    seeds) until the realized history holds both influential and
    non-influential events and enough events exist for the requested split.
    """
    if mark_count < 2:
        raise ValidationError("planted instances need at least 2 marks")
    if history_len < 2 or target_len < 1:
        raise ValidationError("history_len must be >= 2 and target_len >= 1")
    if not (0.0 < influence_fraction < 1.0):
        raise ValidationError("influence_fraction must lie strictly between 0 and 1")
    rng = _rng(seed)
    n_influential = int(round(influence_fraction * mark_count))
    n_influential = min(max(n_influential, 1), mark_count - 1)
    keys = [(_uniform(rng), m) for m in range(mark_count)]
    influential = sorted(m for _, m in sorted(keys)[:n_influential])
    alpha = np.zeros((mark_count, mark_count))
    per_entry = _PLANT_RHO / n_influential
    for k in influential:
        alpha[k, :] = per_entry
    mu = np.full(mark_count, _PLANT_MU)
    model = HawkesExpModel(mu=mu, alpha=alpha, beta=_PLANT_BETA)

    need = history_len + target_len
    stationary_rate = mark_count * _PLANT_MU / (1.0 - _PLANT_RHO)
    influential_set = set(influential)
    horizon = 2.0 * need / stationary_rate
    for attempt in range(max_attempts):
        seq = simulate(model, (0.0, horizon), seed=seed * 1_000_003 + attempt + 1)
        if len(seq) < need:
            horizon *= 1.3
            continue
        head = seq.events[:history_len]
        tail = seq.events[history_len:need]
        head_marks = {ev.mark for ev in head}
        if not (head_marks & influential_set) or head_marks <= influential_set:
            continue
        # the last history event must be influential: it pins the survival
        # term of the first target event, making the ground truth carry the
        # full-history perplexity exactly
        if head[-1].mark not in influential_set:
            continue
        split = (head[-1].time + tail[0].time) / 2.0
        history = EventSequence(events=head, t0=0.0, t_end=split)
        target = EventSequence(events=tail, t0=split, t_end=tail[-1].time)
        instance = Instance(history=history, target=target)
        ground_truth = IndexSubset(
            tuple(i for i, ev in enumerate(head) if ev.mark in influential_set)
        )
        if not _planted_ok(model, instance, ground_truth):
            continue
        return PlantedInstance(model=model, instance=instance, ground_truth=ground_truth)
    raise ValidationError(
        f"planted-instance generation budget exhausted after {max_attempts} attempts "
        f"(seed {seed}); try different lengths or another seed"
    )
