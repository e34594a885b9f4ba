"""Domain types for marked event sequences.

An event is a (mark, time) pair. A sequence is a strictly time-ordered
collection of events observed on a closed window ``[t0, t_end]``; at most one
event may occur at any instant. An :class:`Instance` splits one sequence into
a history part and a target part to be explained, and :class:`IndexSubset`
selects a subset of history positions.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ValidationError

__all__ = [
    "Event",
    "EventSequence",
    "Instance",
    "IndexSubset",
    "validate_sequence",
    "split_instance",
    "subset",
    "read_sequences",
    "write_sequences",
    "read_mark_labels",
    "load_instance",
    "dump_instance",
]


@dataclass(frozen=True)
class Event:
    """A single event: categorical mark and nonnegative occurrence time."""

    mark: int
    time: float

    def __post_init__(self) -> None:
        if isinstance(self.mark, bool) or not isinstance(self.mark, int):
            raise ValidationError(f"mark must be an integer, got {self.mark!r}")
        if self.mark < 0:
            raise ValidationError(f"mark must be >= 0, got {self.mark}")
        t = float(self.time)
        if not math.isfinite(t) or t < 0.0:
            raise ValidationError(f"event time must be finite and >= 0, got {self.time!r}")
        object.__setattr__(self, "time", t)


@dataclass(frozen=True)
class EventSequence:
    """Strictly increasing events on a closed observation window.

    ``t0 <= t_end`` and every event time lies inside ``[t0, t_end]``.
    ``seq_id`` is an optional external identifier carried through file I/O.
    """

    events: tuple[Event, ...]
    t0: float
    t_end: float
    seq_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t_end", float(self.t_end))
        if not (math.isfinite(self.t0) and math.isfinite(self.t_end)):
            raise ValidationError("window bounds must be finite")
        if self.t0 > self.t_end:
            raise ValidationError(f"window start {self.t0} exceeds window end {self.t_end}")
        prev = None
        for ev in self.events:
            if not isinstance(ev, Event):
                raise ValidationError(f"expected Event, got {type(ev).__name__}")
            if prev is not None:
                if ev.time == prev:
                    raise ValidationError(
                        f"duplicate event time {ev.time}: at most one event per instant"
                    )
                if ev.time < prev:
                    raise ValidationError(
                        f"event times must be strictly increasing ({ev.time} after {prev})"
                    )
            if ev.time < self.t0 or ev.time > self.t_end:
                raise ValidationError(
                    f"event time {ev.time} outside window [{self.t0}, {self.t_end}]"
                )
            prev = ev.time

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(ev.time for ev in self.events)

    @property
    def marks(self) -> tuple[int, ...]:
        return tuple(ev.mark for ev in self.events)

    @property
    def last_time(self) -> float:
        """Time of the last event, or the window start when empty."""
        return self.events[-1].time if self.events else self.t0

    def max_mark(self) -> int:
        """Largest mark present, -1 when empty."""
        return max((ev.mark for ev in self.events), default=-1)


@dataclass(frozen=True)
class Instance:
    """A history sequence plus the target sequence to be explained.

    The history window ends exactly where the target window begins, every
    history event precedes every target event, and both parts are nonempty
    (an empty side makes the explanation problem degenerate and is rejected
    here rather than handled downstream).
    """

    history: EventSequence
    target: EventSequence

    def __post_init__(self) -> None:
        if not self.history.events:
            raise ValidationError("instance history must contain at least one event")
        if not self.target.events:
            raise ValidationError("instance target must contain at least one event")
        if self.history.t_end != self.target.t0:
            raise ValidationError(
                "history window must end where the target window begins "
                f"({self.history.t_end} != {self.target.t0})"
            )
        if self.history.events[-1].time >= self.target.events[0].time:
            raise ValidationError("every history event must precede every target event")

    def max_mark(self) -> int:
        return max(self.history.max_mark(), self.target.max_mark())


@dataclass(frozen=True)
class IndexSubset:
    """A duplicate-free, sorted subset of history positions."""

    indices: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        idx = tuple(self.indices)
        for i in idx:
            if isinstance(i, bool) or not isinstance(i, int):
                raise ValidationError(f"index must be an integer, got {i!r}")
            if i < 0:
                raise ValidationError(f"index must be >= 0, got {i}")
        if sorted(idx) != list(idx):
            raise ValidationError("indices must be sorted ascending")
        if len(set(idx)) != len(idx):
            raise ValidationError("indices must not contain duplicates")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, indices: Iterable[int]) -> "IndexSubset":
        return cls(tuple(sorted(set(int(i) for i in indices))))

    @classmethod
    def from_mask(cls, mask: int) -> "IndexSubset":
        if mask < 0:
            raise ValidationError("bitmask must be >= 0")
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return cls(tuple(out))

    @classmethod
    def full(cls, size: int) -> "IndexSubset":
        return cls(tuple(range(size)))

    @property
    def mask(self) -> int:
        m = 0
        for i in self.indices:
            m |= 1 << i
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, i: int) -> bool:
        return i in set(self.indices)

    def validate_for(self, size: int) -> None:
        """Raise unless every index addresses a position in ``range(size)``."""
        if self.indices and self.indices[-1] >= size:
            raise ValidationError(
                f"index {self.indices[-1]} out of range for history of length {size}"
            )

    def complement(self, size: int) -> "IndexSubset":
        self.validate_for(size)
        members = set(self.indices)
        return IndexSubset(tuple(i for i in range(size) if i not in members))


def validate_sequence(
    raw_events: Iterable[tuple[int, float] | Event],
    window: tuple[float, float],
    mark_count: int | None = None,
    seq_id: str | None = None,
) -> EventSequence:
    """Build a validated :class:`EventSequence` from raw (mark, time) pairs.

    Rejects non-monotone or duplicate times, out-of-window or negative times,
    and (when ``mark_count`` is given) marks outside ``[0, mark_count)``.
    """
    events = tuple(
        ev if isinstance(ev, Event) else Event(mark=ev[0], time=ev[1]) for ev in raw_events
    )
    if mark_count is not None:
        for ev in events:
            if ev.mark >= mark_count:
                raise ValidationError(
                    f"mark {ev.mark} out of range for mark count {mark_count}"
                )
    return EventSequence(events=events, t0=window[0], t_end=window[1], seq_id=seq_id)


def split_instance(seq: EventSequence, split_time: float) -> Instance:
    """Split one sequence into history (before ``split_time``) and target.

    Events exactly at ``split_time`` go to the target: the history is the past
    up to, exclusive, the split. The split must lie strictly inside the window
    and leave at least one event on each side.
    """
    s = float(split_time)
    if not (seq.t0 < s < seq.t_end):
        raise ValidationError(
            f"split time {s} must lie strictly inside the window [{seq.t0}, {seq.t_end}]"
        )
    head = tuple(ev for ev in seq.events if ev.time < s)
    tail = tuple(ev for ev in seq.events if ev.time >= s)
    if not head:
        raise ValidationError(f"no events before split time {s}: empty history")
    if not tail:
        raise ValidationError(f"no events at or after split time {s}: empty target")
    history = EventSequence(events=head, t0=seq.t0, t_end=s, seq_id=seq.seq_id)
    target = EventSequence(events=tail, t0=s, t_end=seq.t_end, seq_id=seq.seq_id)
    return Instance(history=history, target=target)


def subset(history: EventSequence, idx: IndexSubset) -> EventSequence:
    """Materialize the sub-sequence at the given positions; window unchanged."""
    idx.validate_for(len(history))
    events = tuple(history.events[i] for i in idx.indices)
    return EventSequence(
        events=events, t0=history.t0, t_end=history.t_end, seq_id=history.seq_id
    )


# ---------------------------------------------------------------------------
# File formats.
#
# Sequences: JSON Lines, one object per line:
#   {"id": "<string>", "t0": <real>, "t_end": <real>,
#    "events": [{"m": <int>, "t": <real>}, ...]}
# An optional first header line {"mark_labels": {"<label>": <int>, ...}} maps
# external string labels to dense integer marks.
#
# Instance file: {"history": <sequence object>, "target": <sequence object>}.
# ---------------------------------------------------------------------------


def _sequence_to_obj(seq: EventSequence, fallback_id: str) -> dict:
    return {
        "id": seq.seq_id if seq.seq_id is not None else fallback_id,
        "t0": seq.t0,
        "t_end": seq.t_end,
        "events": [{"m": ev.mark, "t": ev.time} for ev in seq.events],
    }


def _sequence_from_obj(obj: dict, mark_count: int | None = None) -> EventSequence:
    try:
        raw = [(int(e["m"]), float(e["t"])) for e in obj["events"]]
        window = (float(obj["t0"]), float(obj["t_end"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed sequence object: {exc}") from exc
    seq_id = obj.get("id")
    if seq_id is not None:
        seq_id = str(seq_id)
    return validate_sequence(raw, window, mark_count=mark_count, seq_id=seq_id)


def write_sequences(
    path: str | Path,
    sequences: Sequence[EventSequence],
    mark_labels: dict[str, int] | None = None,
) -> None:
    """Write sequences as JSON Lines, with an optional mark-label header."""
    with open(path, "w", encoding="utf-8") as fh:
        if mark_labels is not None:
            fh.write(json.dumps({"mark_labels": mark_labels}, sort_keys=True) + "\n")
        for i, seq in enumerate(sequences):
            fh.write(json.dumps(_sequence_to_obj(seq, f"seq-{i:05d}"), sort_keys=True) + "\n")


def _iter_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ValidationError(f"{path}:{lineno}: expected a JSON object")
            yield obj


def read_sequences(path: str | Path, mark_count: int | None = None) -> list[EventSequence]:
    """Read a JSON Lines sequence file, skipping the optional header line."""
    out = []
    for obj in _iter_jsonl(path):
        if "events" not in obj and "mark_labels" in obj:
            continue
        out.append(_sequence_from_obj(obj, mark_count=mark_count))
    return out


def read_mark_labels(path: str | Path) -> dict[str, int] | None:
    """Return the mark-label header of a JSON Lines file, if present."""
    for obj in _iter_jsonl(path):
        if "events" not in obj and "mark_labels" in obj:
            labels = obj["mark_labels"]
            if not isinstance(labels, dict):
                raise ValidationError("mark_labels header must be an object")
            return {str(k): int(v) for k, v in labels.items()}
        break
    return None


def dump_instance(path: str | Path, instance: Instance) -> None:
    obj = {
        "history": _sequence_to_obj(instance.history, "history"),
        "target": _sequence_to_obj(instance.target, "target"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path: str | Path, mark_count: int | None = None) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "history" not in obj or "target" not in obj:
        raise ValidationError(f"{path}: instance file needs 'history' and 'target'")
    return Instance(
        history=_sequence_from_obj(obj["history"], mark_count=mark_count),
        target=_sequence_from_obj(obj["target"], mark_count=mark_count),
    )
