"""Marked temporal point process models.

A model exposes, for any conditioning sequence of past events:

* the conditional intensity ``lambda(m, t)`` of a mark-``m`` event at ``t``,
* the compensator, i.e. the total intensity integrated over an interval,
* the joint density of the next event ``p(m, t) = lambda(m, t) *
  exp(-integral of the total intensity from the last conditioning time)``,
* the negative log-likelihood of an observed sequence on its window
  ``-sum_i log lambda(m_i, t_i) + integral_{t0}^{t_end} total intensity``,
* next-event prediction: expected time under the next-event density, then
  the most probable mark at that time.

Two implementations are provided: a multivariate Hawkes process with
exponential kernel ``alpha[k, m] * beta * exp(-beta * tau)`` (closed-form
compensator, branching-ratio matrix ``alpha``, shared decay ``beta``) and a
homogeneous Poisson process. Models are immutable; every operation is pure.
"""

from __future__ import annotations

import abc
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import NumericalError, ValidationError
from .events import Event, EventSequence

__all__ = [
    "MtppModel",
    "HawkesExpModel",
    "PoissonModel",
    "Prediction",
    "load_model",
    "dump_model",
    "model_to_obj",
    "model_from_obj",
]

# Prediction integrates the next-event density out to this many expected
# baseline events past the last conditioning time; the remaining mass is
# added through an analytic exponential tail.
PREDICT_HORIZON_BASELINE_EVENTS = 40.0
PREDICT_MAX_TAIL_MASS = 1e-6


@dataclass(frozen=True)
class Prediction:
    """Next-event prediction with the density samples used to compute it."""

    t_bar: float
    m_bar: int
    grid_times: tuple[float, ...]
    grid_density: tuple[float, ...]


class MtppModel(abc.ABC):
    """Black-box model contract: deterministic, nonnegative intensities."""

    @property
    @abc.abstractmethod
    def mark_count(self) -> int: ...

    @abc.abstractmethod
    def _intensity_vector(self, events: Sequence[Event], t: float) -> np.ndarray:
        """Per-mark intensity at ``t`` given events strictly before ``t``.

        Events at or after ``t`` are ignored; callers guarantee ordering.
        """

    @abc.abstractmethod
    def _compensator(self, events: Sequence[Event], a: float, b: float) -> float:
        """Total intensity integrated over ``[a, b]`` given the events."""

    # -- validated public operations ------------------------------------

    def _check_mark(self, mark: int) -> None:
        if not (0 <= mark < self.mark_count):
            raise ValidationError(f"mark {mark} out of range [0, {self.mark_count})")

    def intensity_at(self, conditioning: EventSequence, mark: int, t: float) -> float:
        """Conditional intensity of a mark-``mark`` event at time ``t``."""
        self._check_mark(mark)
        if conditioning.events and t <= conditioning.events[-1].time:
            raise ValidationError(
                f"query time {t} must be strictly after the conditioning events"
            )
        return float(self._intensity_vector(conditioning.events, t)[mark])

    def compensator(self, conditioning: EventSequence, a: float, b: float) -> float:
        """Total intensity integrated over ``[a, b]``."""
        if b < a:
            raise ValidationError(f"reversed interval [{a}, {b}]")
        if a < conditioning.t0:
            raise ValidationError(
                f"interval start {a} precedes the conditioning window start {conditioning.t0}"
            )
        return self._compensator(conditioning.events, a, b)

    def _last_time(self, conditioning: EventSequence) -> float:
        # Last conditioning event time; the window start when there are no
        # conditioning events.
        return conditioning.last_time

    def next_event_density(self, conditioning: EventSequence, mark: int, t: float) -> float:
        """Joint density of the next event having this mark and time."""
        self._check_mark(mark)
        t_l = self._last_time(conditioning)
        if t <= t_l:
            raise ValidationError(f"query time {t} must be strictly after t_l={t_l}")
        lam = float(self._intensity_vector(conditioning.events, t)[mark])
        comp = self._compensator(conditioning.events, t_l, t)
        return lam * math.exp(-comp)

    def event_loglik(self, conditioning: EventSequence, event: Event) -> float:
        """Log next-event density at ``event``; ``-inf`` when the density is 0."""
        self._check_mark(event.mark)
        t_l = self._last_time(conditioning)
        if event.time <= t_l:
            raise ValidationError(f"event time {event.time} must be strictly after t_l={t_l}")
        lam = float(self._intensity_vector(conditioning.events, event.time)[event.mark])
        if lam <= 0.0:
            return -math.inf
        comp = self._compensator(conditioning.events, t_l, event.time)
        return math.log(lam) - comp

    def sequence_nll(self, conditioning: EventSequence, seq: EventSequence) -> float:
        """Negative log-likelihood of ``seq`` observed on its own window.

        Conditioning events contribute excitation only; their log-intensity
        terms are excluded. A zero intensity at an observed event yields
        ``+inf`` rather than an exception.
        """
        if conditioning.events and seq.events:
            if seq.events[0].time <= conditioning.events[-1].time:
                raise ValidationError("sequence must lie strictly after the conditioning events")
        loglam = 0.0
        past: list[Event] = list(conditioning.events)
        for ev in seq.events:
            lam = float(self._intensity_vector(past, ev.time)[ev.mark])
            if lam <= 0.0:
                return math.inf
            loglam += math.log(lam)
            past.append(ev)
        comp = self._compensator(past, seq.t0, seq.t_end)
        return -loglam + comp

    @property
    @abc.abstractmethod
    def total_baseline_rate(self) -> float:
        """Sum of baseline rates over marks; positive for both models here."""

    def predict_next(self, conditioning: EventSequence) -> Prediction:
        """Expected next-event time, then the most probable mark at it.

        The time expectation integrates ``t * p(t)`` by adaptive quadrature
        over a horizon of ``40 / total baseline rate`` past the last
        conditioning time and adds an analytic exponential tail; the call
        fails if the tail mass exceeds ``1e-6`` or the quadrature does not
        converge. Mark ties break to the lowest index.
        """
        events = conditioning.events
        t_l = self._last_time(conditioning)
        rate0 = self.total_baseline_rate
        horizon = PREDICT_HORIZON_BASELINE_EVENTS / rate0
        upper = t_l + horizon
        tail_mass = math.exp(-self._compensator(events, t_l, upper))
        if tail_mass > PREDICT_MAX_TAIL_MASS:
            raise NumericalError(
                f"next-event tail mass {tail_mass:.3e} beyond horizon {upper} exceeds "
                f"{PREDICT_MAX_TAIL_MASS:.0e}; the model decays too slowly for prediction"
            )

        def density(t: float) -> float:
            lam = self._intensity_vector(events, t)
            return float(np.sum(lam)) * math.exp(-self._compensator(events, t_l, t))

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                mean_main, err = integrate.quad(
                    lambda t: t * density(t), t_l, upper, limit=200
                )
            except integrate.IntegrationWarning as exc:
                raise NumericalError(f"next-event time quadrature did not converge: {exc}") from exc
        if not math.isfinite(mean_main):
            raise NumericalError("next-event time quadrature returned a non-finite value")
        # Beyond the horizon the total intensity is within tail_mass-level
        # error of the baseline rate, so the remaining expectation is that of
        # an exponential clock starting at `upper`.
        t_bar = mean_main + tail_mass * (upper + 1.0 / rate0)
        lam_at = self._intensity_vector(events, t_bar)
        m_bar = int(np.argmax(lam_at))
        grid = np.linspace(t_l, upper, 257)[1:]
        dens = tuple(density(float(t)) for t in grid)
        return Prediction(
            t_bar=float(t_bar),
            m_bar=m_bar,
            grid_times=tuple(float(t) for t in grid),
            grid_density=dens,
        )


def _readonly_array(values, shape_name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValidationError(f"{shape_name} must be {ndim}-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{shape_name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class HawkesExpModel(MtppModel):
    """Multivariate Hawkes process with exponential kernel.

    ``mu[m] > 0`` are baseline rates (events per time unit), ``alpha[k, m]``
    the dimensionless branching ratios from source mark ``k`` to target mark
    ``m``, and ``beta > 0`` the shared decay (inverse time units). The
    spectral radius of ``alpha`` below 1 gives a stationary process; larger
    values are allowed for evaluation but trigger a warning and are rejected
    by the simulator.
    """

    mu: np.ndarray
    alpha: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        mu = _readonly_array(self.mu, "mu", 1)
        alpha = _readonly_array(self.alpha, "alpha", 2)
        if alpha.shape != (mu.size, mu.size):
            raise ValidationError(
                f"alpha shape {alpha.shape} does not match mark count {mu.size}"
            )
        if mu.size == 0:
            raise ValidationError("mu must contain at least one mark")
        if np.any(mu <= 0.0):
            raise ValidationError("baseline rates mu must be strictly positive")
        if np.any(alpha < 0.0):
            raise ValidationError("branching ratios alpha must be nonnegative")
        beta = float(self.beta)
        if not math.isfinite(beta) or beta <= 0.0:
            raise ValidationError("decay beta must be a positive real")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        rho = self.spectral_radius()
        if rho >= 1.0:
            warnings.warn(
                f"alpha spectral radius {rho:.4f} >= 1: the process is non-stationary",
                stacklevel=2,
            )

    @property
    def mark_count(self) -> int:
        return int(self.mu.size)

    @property
    def total_baseline_rate(self) -> float:
        return float(np.sum(self.mu))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.alpha))))

    def row_sums(self) -> np.ndarray:
        """Total branching ratio out of each source mark."""
        return np.sum(self.alpha, axis=1)

    def _intensity_vector(self, events: Sequence[Event], t: float) -> np.ndarray:
        lam = self.mu.copy()
        beta = self.beta
        for ev in events:
            if ev.time >= t:
                break
            lam += self.alpha[ev.mark] * (beta * math.exp(-beta * (t - ev.time)))
        return lam

    def _compensator(self, events: Sequence[Event], a: float, b: float) -> float:
        if b <= a:
            return 0.0
        total = float(np.sum(self.mu)) * (b - a)
        row = self.row_sums()
        beta = self.beta
        for ev in events:
            if ev.time >= b:
                break
            start = a if ev.time <= a else ev.time
            total += float(row[ev.mark]) * (
                math.exp(-beta * (start - ev.time)) - math.exp(-beta * (b - ev.time))
            )
        return total

    def sequence_nll(self, conditioning: EventSequence, seq: EventSequence) -> float:
        """O(n * M) negative log-likelihood using the decayed-sum recursion."""
        if conditioning.events and seq.events:
            if seq.events[0].time <= conditioning.events[-1].time:
                raise ValidationError("sequence must lie strictly after the conditioning events")
        m_count = self.mark_count
        beta = self.beta
        # r[k] = sum over past events of mark k of exp(-beta * (t_now - t_j))
        r = np.zeros(m_count)
        t_prev: float | None = None
        loglam = 0.0

        def advance(t_now: float) -> None:
            nonlocal t_prev
            if t_prev is not None and t_now > t_prev:
                r_mul = math.exp(-beta * (t_now - t_prev))
                np.multiply(r, r_mul, out=r)
            t_prev = t_now

        for ev in conditioning.events:
            advance(ev.time)
            r[ev.mark] += 1.0
        for ev in seq.events:
            advance(ev.time)
            lam = float(self.mu[ev.mark]) + beta * float(np.dot(self.alpha[:, ev.mark], r))
            if lam <= 0.0:
                return math.inf
            loglam += math.log(lam)
            r[ev.mark] += 1.0
        past = list(conditioning.events) + list(seq.events)
        comp = self._compensator(past, seq.t0, seq.t_end)
        return -loglam + comp


@dataclass(frozen=True, eq=False)
class PoissonModel(MtppModel):
    """Homogeneous Poisson process with per-mark rates ``mu >= 0``."""

    mu: np.ndarray

    def __post_init__(self) -> None:
        mu = _readonly_array(self.mu, "mu", 1)
        if mu.size == 0:
            raise ValidationError("mu must contain at least one mark")
        if np.any(mu < 0.0):
            raise ValidationError("rates mu must be nonnegative")
        if float(np.sum(mu)) <= 0.0:
            raise ValidationError("total rate must be positive")
        object.__setattr__(self, "mu", mu)

    @property
    def mark_count(self) -> int:
        return int(self.mu.size)

    @property
    def total_baseline_rate(self) -> float:
        return float(np.sum(self.mu))

    def _intensity_vector(self, events: Sequence[Event], t: float) -> np.ndarray:
        return self.mu.copy()

    def _compensator(self, events: Sequence[Event], a: float, b: float) -> float:
        if b <= a:
            return 0.0
        return float(np.sum(self.mu)) * (b - a)

    def sequence_nll(self, conditioning: EventSequence, seq: EventSequence) -> float:
        loglam = 0.0
        for ev in seq.events:
            lam = float(self.mu[ev.mark])
            if lam <= 0.0:
                return math.inf
            loglam += math.log(lam)
        return -loglam + self.total_baseline_rate * (seq.t_end - seq.t0)


# ---------------------------------------------------------------------------
# Model files:
#   {"type": "hawkes_exp", "mu": [...], "alpha": [[...]], "beta": <real>}
#   {"type": "poisson", "mu": [...]}
# ---------------------------------------------------------------------------


def model_to_obj(model: MtppModel) -> dict:
    if isinstance(model, HawkesExpModel):
        return {
            "type": "hawkes_exp",
            "mu": [float(x) for x in model.mu],
            "alpha": [[float(x) for x in row] for row in model.alpha],
            "beta": model.beta,
        }
    if isinstance(model, PoissonModel):
        return {"type": "poisson", "mu": [float(x) for x in model.mu]}
    raise ValidationError(f"cannot serialize model of type {type(model).__name__}")


def model_from_obj(obj: dict) -> MtppModel:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValidationError("model object must be a dict with a 'type' key")
    kind = obj["type"]
    try:
        if kind == "hawkes_exp":
            return HawkesExpModel(
                mu=np.asarray(obj["mu"], dtype=float),
                alpha=np.asarray(obj["alpha"], dtype=float),
                beta=float(obj["beta"]),
            )
        if kind == "poisson":
            return PoissonModel(mu=np.asarray(obj["mu"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed {kind} model object: {exc}") from exc
    raise ValidationError(f"unknown model type {kind!r}")


def load_model(path: str | Path) -> MtppModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_obj(obj)


def dump_model(path: str | Path, model: MtppModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_obj(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
