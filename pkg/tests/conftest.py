from pathlib import Path

import numpy as np
import pytest

from ehd.events import Event, EventSequence, Instance
from ehd.models import HawkesExpModel, PoissonModel

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def fixtures_root() -> Path:
    root = REPO_ROOT / "fixtures"
    if not root.exists():
        pytest.fail(
            "shipped fixtures missing; regenerate with "
            "`python -m ehd.cli fixtures --out fixtures --planted 12 --seed 0`"
        )
    return root


@pytest.fixture
def hawkes1() -> HawkesExpModel:
    return HawkesExpModel(mu=np.array([0.2]), alpha=np.array([[0.5]]), beta=1.0)


@pytest.fixture
def poisson1() -> PoissonModel:
    return PoissonModel(mu=np.array([1.0]))


def make_instance(history_times, target_times, history_marks=None, target_marks=None) -> Instance:
    """Instance with the split halfway between the last history and first
    target event."""
    history_marks = history_marks or [0] * len(history_times)
    target_marks = target_marks or [0] * len(target_times)
    split = (history_times[-1] + target_times[0]) / 2.0
    history = EventSequence(
        tuple(Event(m, t) for m, t in zip(history_marks, history_times)), 0.0, split
    )
    target = EventSequence(
        tuple(Event(m, t) for m, t in zip(target_marks, target_times)), split, target_times[-1]
    )
    return Instance(history=history, target=target)
