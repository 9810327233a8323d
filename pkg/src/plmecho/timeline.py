"""Timed protocol events and the validated :class:`ProtocolTimeline` container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .envelope import FieldEnvelope
from .errors import InvalidTimeline
from .pulses import OpticalPiPulse, PlmPrep, RfPulse


@dataclass(frozen=True)
class RfEvent:
    pulse: RfPulse
    action = "rf-pulse"

    @property
    def start(self) -> float:
        return self.pulse.time

    @property
    def end(self) -> float:
        return self.pulse.time


@dataclass(frozen=True)
class OpticalPiEvent:
    pulse: OpticalPiPulse
    action = "optical-pi"

    @property
    def start(self) -> float:
        return self.pulse.time

    @property
    def end(self) -> float:
        return self.pulse.time


@dataclass(frozen=True)
class PlmPrepEvent:
    prep: PlmPrep
    action = "plm-prep"

    @property
    def start(self) -> float:
        return self.prep.rf.time

    @property
    def end(self) -> float:
        return self.prep.end_time


@dataclass(frozen=True)
class DecayIntervalEvent:
    """Explicit storage interval; the state only precesses and decays."""

    time: float
    duration: float
    action = "decay-interval"

    @property
    def start(self) -> float:
        return self.time

    @property
    def end(self) -> float:
        return self.time + self.duration


@dataclass(frozen=True)
class AbsorbEvent:
    field: FieldEnvelope
    action = "absorb"

    @property
    def start(self) -> float:
        return self.field.t0

    @property
    def end(self) -> float:
        return self.field.t0 + max(self.field.n - 1, 0) * self.field.dt


@dataclass(frozen=True)
class RetrieveEvent:
    time: float
    duration: float
    carrier: str = "1-3"
    action = "retrieve"

    @property
    def start(self) -> float:
        return self.time

    @property
    def end(self) -> float:
        return self.time + self.duration


Event = Union[RfEvent, OpticalPiEvent, PlmPrepEvent, DecayIntervalEvent, AbsorbEvent, RetrieveEvent]


@dataclass(frozen=True)
class ProtocolTimeline:
    """Ordered events of one memory cycle plus the predicted echo.

    Ordering rule: each event starts no earlier than the previous one ends.
    Two instantaneous pulses may not share an instant (their order would be
    ambiguous); an instantaneous pulse may share its instant with the start
    of an extended event that follows it.
    """

    events: tuple
    variant: str = "basic"
    expected_echo_time: float | None = None
    echo_carrier: str = "1-3"
    polarization: float = 1.0
    notes: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        validate_timeline(self)

    @property
    def absorb(self) -> AbsorbEvent:
        return next(e for e in self.events if isinstance(e, AbsorbEvent))

    @property
    def retrieve(self) -> RetrieveEvent:
        return next(e for e in self.events if isinstance(e, RetrieveEvent))

    def shelved_time(self) -> float:
        """Total time the stored coherence spends on the shelf (between 3-s pulse pairs)."""
        times = [e.start for e in self.events if isinstance(e, OpticalPiEvent) and e.pulse.transition == "3-s"]
        return sum(b - a for a, b in zip(times[0::2], times[1::2]))

    def optical_span(self) -> float:
        """Time the optical coherences precess between absorption start and retrieval end."""
        return self.retrieve.end - self.absorb.start - self.shelved_time()


def validate_timeline(timeline: ProtocolTimeline) -> None:
    events = timeline.events
    n_abs = sum(isinstance(e, AbsorbEvent) for e in events)
    n_ret = sum(isinstance(e, RetrieveEvent) for e in events)
    if n_abs != 1 or n_ret != 1:
        raise InvalidTimeline(f"need exactly one absorb and one retrieve, got {n_abs} and {n_ret}")
    prev = None
    for ev in events:
        if ev.end < ev.start:
            raise InvalidTimeline(f"{ev.action} event ends before it starts")
        if prev is not None:
            if ev.start < prev.end:
                raise InvalidTimeline(
                    f"{ev.action} at {ev.start:.6g} s overlaps {prev.action} ending at {prev.end:.6g} s"
                )
            if ev.start == prev.start and ev.end == ev.start and prev.end == prev.start:
                raise InvalidTimeline(f"two instantaneous pulses at {ev.start:.6g} s")
        prev = ev
    i_abs = next(i for i, e in enumerate(events) if isinstance(e, AbsorbEvent))
    i_ret = next(i for i, e in enumerate(events) if isinstance(e, RetrieveEvent))
    if i_ret < i_abs:
        raise InvalidTimeline("retrieve must follow absorb")
    shelf = [e for e in events if isinstance(e, OpticalPiEvent) and e.pulse.transition == "3-s"]
    if len(shelf) % 2:
        raise InvalidTimeline("shelving pulses on 3-s must come in pairs")
