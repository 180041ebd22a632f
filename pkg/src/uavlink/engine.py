"""Deterministic discrete-event core.

Virtual time is an integer count of microseconds since scenario start.
The engine is the sole driver of time: components run only inside event
dispatch, and two runs fed the same script produce the same event order.
Simultaneous events dispatch in insertion order.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, Tuple

SimTime = int  # microseconds

US_PER_MS = 1_000
US_PER_SEC = 1_000_000


def ms(v: float) -> SimTime:
    return round(v * US_PER_MS)


def sec(v: float) -> SimTime:
    return round(v * US_PER_SEC)


class EventKind(Enum):
    PACKET_ARRIVAL = "packet-arrival"
    DELIVERY = "delivery"
    ACK = "ack"
    TIMER = "timer"
    HANDOVER_START = "handover-start"
    HANDOVER_END = "handover-end"


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current virtual time."""


_PENDING = 0
_FIRED = 1
_CANCELLED = 2


@dataclass
class Event:
    fire_at: SimTime
    kind: EventKind
    fn: Callable[[], None]
    target: str = ""
    payload: Any = None
    _state: int = field(default=_PENDING, repr=False)

    @property
    def pending(self) -> bool:
        return self._state == _PENDING


class Engine:
    """Priority-queue event loop keyed on (fire_at, insertion sequence)."""

    def __init__(self) -> None:
        self._now: SimTime = 0
        self._heap: List[Tuple[SimTime, int, Event]] = []
        self._seq = 0
        self.dispatched = 0

    def now(self) -> SimTime:
        return self._now

    def schedule(self, e: Event) -> Event:
        """Queue an event; the returned event doubles as a cancellation ticket."""
        if e.fire_at < self._now:
            raise SchedulingError(
                f"event {e.kind.value!r} (target={e.target!r}) scheduled at "
                f"{e.fire_at} us, before current time {self._now} us"
            )
        self._seq += 1
        heapq.heappush(self._heap, (e.fire_at, self._seq, e))
        return e

    def call_at(
        self,
        fire_at: SimTime,
        fn: Callable[[], None],
        kind: EventKind = EventKind.TIMER,
        target: str = "",
        payload: Any = None,
    ) -> Event:
        return self.schedule(Event(fire_at, kind, fn, target, payload))

    def cancel(self, ticket: Event) -> bool:
        """Suppress a pending event. Idempotent; returns False once fired."""
        if ticket._state != _PENDING:
            return False
        ticket._state = _CANCELLED
        return True

    def run_until(self, t_end: SimTime) -> int:
        """Dispatch every event with fire_at <= t_end in order; ends at t_end.

        Returns the number of events dispatched (cancelled ones excluded).
        """
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is before now ({self._now})")
        steps = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            fire_at, _, ev = heapq.heappop(heap)
            if ev._state != _PENDING:
                continue
            self._now = fire_at
            ev._state = _FIRED
            ev.fn()
            steps += 1
        self._now = t_end
        self.dispatched += steps
        return steps

    def peek_next_time(self) -> SimTime | None:
        while self._heap and self._heap[0][2]._state != _PENDING:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None
