"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import ValidationError
from .events import EventSequence, Instance


def check_event_sequences(
    X: Iterable[EventSequence], mark_count: int | None = None
) -> list[EventSequence]:
    """Validate a collection of sequences; returns it as a list.

    When ``mark_count`` is None the required count is inferred as the largest
    mark present plus one.
    """
    seqs = list(X)
    if not seqs:
        raise ValidationError("expected at least one event sequence")
    for i, seq in enumerate(seqs):
        if not isinstance(seq, EventSequence):
            raise ValidationError(
                f"element {i} is {type(seq).__name__}, expected EventSequence"
            )
    if mark_count is not None:
        for seq in seqs:
            if seq.max_mark() >= mark_count:
                raise ValidationError(
                    f"sequence uses mark {seq.max_mark()} but mark_count={mark_count}"
                )
    return seqs


def infer_mark_count(seqs: Sequence[EventSequence]) -> int:
    top = max((seq.max_mark() for seq in seqs), default=-1)
    if top < 0:
        raise ValidationError("cannot infer mark count from empty sequences")
    return top + 1


def check_instance(instance: Instance) -> Instance:
    if not isinstance(instance, Instance):
        raise ValidationError(f"expected Instance, got {type(instance).__name__}")
    return instance
