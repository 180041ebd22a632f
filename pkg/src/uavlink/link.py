"""Emulated cellular bottleneck: rate shaping from either a constant /
stepped rate or a delivery-opportunity trace, fixed propagation delay,
seeded random loss, a bounded tail-drop queue, and scheduled radio
blackouts.

Trace files are newline-separated integer millisecond timestamps; each
line grants one delivery opportunity for a packet up to the MTU, and the
schedule repeats cyclically with a period equal to the last timestamp.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Deque, IO, List, Optional, Tuple, Union

from collections import deque

from .engine import Engine, Event, EventKind, SimTime, US_PER_MS, US_PER_SEC


class TraceError(ValueError):
    """Trace file rejected; the message names the offending line."""


class LinkContractError(RuntimeError):
    """Caller violated a link precondition (e.g. oversized packet)."""


@dataclass
class LinkTrace:
    opportunities_ms: List[int]
    mtu_bytes: int = 1500

    def __post_init__(self) -> None:
        if not self.opportunities_ms:
            raise TraceError("trace has no opportunities")
        if self.mtu_bytes <= 0:
            raise ValueError("mtu_bytes must be positive")
        prev = -1
        for i, t in enumerate(self.opportunities_ms):
            if t < prev:
                raise TraceError(f"line {i + 1}: timestamp {t} decreases (previous {prev})")
            prev = t
        if self.opportunities_ms[-1] <= 0:
            raise TraceError("trace must span a nonzero duration (last timestamp 0)")

    @property
    def period_ms(self) -> int:
        return self.opportunities_ms[-1]

    def mean_capacity_bps(self) -> float:
        """Long-run average rate granted by the repeating schedule."""
        return len(self.opportunities_ms) * self.mtu_bytes * 8 * 1000 / self.period_ms


def load_trace(source: Union[IO[str], IO[bytes]], mtu_bytes: int = 1500) -> LinkTrace:
    """Parse a delivery-opportunity trace, reporting errors by line number."""
    opportunities: List[int] = []
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("ascii", errors="replace")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            value = int(line)
        except ValueError:
            raise TraceError(f"line {lineno}: not an integer: {line!r}") from None
        if value < 0:
            raise TraceError(f"line {lineno}: negative timestamp {value}")
        if opportunities and value < opportunities[-1]:
            raise TraceError(
                f"line {lineno}: timestamp {value} decreases (previous {opportunities[-1]})"
            )
        opportunities.append(value)
    if not opportunities:
        raise TraceError("trace file is empty")
    return LinkTrace(opportunities, mtu_bytes)


@dataclass
class RateStep:
    start_us: SimTime
    rate_bps: int


class CapacitySchedule:
    """Piecewise-constant rate; a single step means a constant-rate link."""

    def __init__(self, steps: List[RateStep]) -> None:
        if not steps:
            raise ValueError("capacity schedule needs at least one step")
        if steps[0].start_us != 0:
            raise ValueError("first capacity step must start at t=0")
        for a, b in zip(steps, steps[1:]):
            if b.start_us <= a.start_us:
                raise ValueError("capacity steps must strictly increase in time")
        for s in steps:
            if s.rate_bps <= 0:
                raise ValueError("capacity must be positive")
        self.steps = steps

    @classmethod
    def constant(cls, rate_bps: int) -> "CapacitySchedule":
        return cls([RateStep(0, rate_bps)])

    def rate_at(self, t: SimTime) -> int:
        rate = self.steps[0].rate_bps
        for s in self.steps:
            if s.start_us <= t:
                rate = s.rate_bps
            else:
                break
        return rate

    def serialize_end(self, start_us: SimTime, bits: int) -> SimTime:
        """Time at which `bits` finish transmitting if started at `start_us`."""
        t = start_us
        remaining = float(bits)
        idx = 0
        while idx < len(self.steps) and self.steps[idx].start_us <= t:
            idx += 1
        idx -= 1
        while True:
            rate = self.steps[idx].rate_bps
            seg_end = self.steps[idx + 1].start_us if idx + 1 < len(self.steps) else None
            finish = t + remaining * US_PER_SEC / rate
            if seg_end is None or finish <= seg_end:
                return max(start_us, round(finish))
            remaining -= rate * (seg_end - t) / US_PER_SEC
            t = seg_end
            idx += 1


@dataclass
class Blackout:
    start_us: SimTime
    t_phy_us: SimTime

    @property
    def end_us(self) -> SimTime:
        return self.start_us + self.t_phy_us


@dataclass
class LinkCounters:
    packets_in: int = 0
    delivered: int = 0
    tail_dropped: int = 0
    loss_dropped: int = 0
    blackout_dropped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class _Queued:
    item: object
    wire_bytes: int
    enqueued_at: SimTime


class LinkModel:
    """One-direction bottleneck driven entirely by the event engine.

    Deliverable callbacks:
      on_deliver(item, now)   -- packet reached the far end
      on_writable()           -- serializer went idle with an empty queue
      on_blackout(active)     -- radio detach began / ended
    """

    def __init__(
        self,
        engine: Engine,
        capacity: Union[CapacitySchedule, LinkTrace],
        one_way_delay_us: SimTime,
        loss_rate: float,
        queue_capacity_bytes: int,
        mtu_bytes: int = 1500,
        rng: Optional[random.Random] = None,
        name: str = "link",
    ) -> None:
        if not 0.0 <= loss_rate <= 1.0:
            raise ValueError("loss_rate must be within [0, 1]")
        if queue_capacity_bytes <= mtu_bytes:
            raise ValueError("queue capacity must exceed one MTU")
        self.engine = engine
        self.capacity = capacity
        self.one_way_delay_us = one_way_delay_us
        self.loss_rate = loss_rate
        self.queue_capacity_bytes = queue_capacity_bytes
        self.mtu_bytes = capacity.mtu_bytes if isinstance(capacity, LinkTrace) else mtu_bytes
        self.rng = rng or random.Random(0)
        self.name = name

        self.queue: Deque[_Queued] = deque()
        self.occupancy_bytes = 0
        self.in_propagation = 0
        self._busy = False
        self._service_ends_at: SimTime = 0
        self._completion_ticket: Optional[Event] = None
        self._trace_cursor = 0  # consumed opportunities, trace mode only

        self.blackouts: List[Blackout] = []
        self._blackout_active = False

        self.counters = LinkCounters()
        self.on_deliver: Callable[[object, SimTime], None] = lambda item, now: None
        self.on_writable: Callable[[], None] = lambda: None
        self.on_blackout: Callable[[bool], None] = lambda active: None

    # -- capacity ------------------------------------------------------------

    def capacity_at(self, t: SimTime) -> float:
        """Instantaneous (stepped) or one-second-window (trace) rate; 0 in blackout."""
        for b in self.blackouts:
            if b.start_us <= t < b.end_us:
                return 0.0
        if isinstance(self.capacity, CapacitySchedule):
            return float(self.capacity.rate_at(t))
        trace = self.capacity
        period_us = trace.period_ms * US_PER_MS
        t_ms = (t % period_us) // US_PER_MS
        window = [
            opp
            for cycle in (0, trace.period_ms)
            for opp in (o + cycle for o in trace.opportunities_ms)
            if t_ms <= opp < t_ms + 1000
        ]
        return len(window) * trace.mtu_bytes * 8.0

    def _next_opportunity_at(self, after_us: SimTime) -> SimTime:
        trace = self.capacity
        period_us = trace.period_ms * US_PER_MS
        n = len(trace.opportunities_ms)
        while True:
            cycle, idx = divmod(self._trace_cursor, n)
            t = trace.opportunities_ms[idx] * US_PER_MS + cycle * period_us
            if t >= after_us:
                self._trace_cursor += 1
                return t
            self._trace_cursor += 1

    # -- blackouts -------------------------------------------------------------

    def inject_handover(self, start_us: SimTime, t_phy_us: SimTime) -> Blackout:
        if t_phy_us <= 0:
            raise ValueError("blackout duration must be positive")
        if start_us < self.engine.now():
            raise ValueError("blackout must start at or after the current time")
        new = Blackout(start_us, t_phy_us)
        for b in self.blackouts:
            if new.start_us < b.end_us and b.start_us < new.end_us:
                raise ValueError("overlapping blackouts are rejected")
        self.blackouts.append(new)
        self.engine.call_at(start_us, lambda: self._blackout_begin(new),
                            EventKind.HANDOVER_START, target=self.name)
        self.engine.call_at(new.end_us, lambda: self._blackout_end(new),
                            EventKind.HANDOVER_END, target=self.name)
        return new

    def _blackout_begin(self, b: Blackout) -> None:
        self._blackout_active = True
        # radio detach: everything waiting or mid-transmission is lost
        self.counters.blackout_dropped += len(self.queue)
        self.queue.clear()
        self.occupancy_bytes = 0
        if self._busy:
            if self._completion_ticket is not None:
                self.engine.cancel(self._completion_ticket)
            self._busy = False
            self.counters.blackout_dropped += 1
        self.on_blackout(True)

    def _blackout_end(self, b: Blackout) -> None:
        self._blackout_active = False
        self.on_blackout(False)
        self.on_writable()

    def blackout_active_at(self, t: SimTime) -> bool:
        return any(b.start_us <= t < b.end_us for b in self.blackouts)

    # -- transmission ----------------------------------------------------------

    def writable(self) -> bool:
        return not self._blackout_active and not self._busy and not self.queue

    def send(self, item: object, wire_bytes: int, now: SimTime) -> bool:
        if wire_bytes > self.mtu_bytes:
            raise LinkContractError(
                f"packet of {wire_bytes} B exceeds link MTU {self.mtu_bytes} B"
            )
        self.counters.packets_in += 1
        if self._blackout_active:
            self.counters.blackout_dropped += 1
            return False
        if self.occupancy_bytes + wire_bytes > self.queue_capacity_bytes:
            self.counters.tail_dropped += 1
            return False
        self.queue.append(_Queued(item, wire_bytes, now))
        self.occupancy_bytes += wire_bytes
        if not self._busy:
            self._start_service(now)
        return True

    def _start_service(self, now: SimTime) -> None:
        q = self.queue.popleft()
        self.occupancy_bytes -= q.wire_bytes
        if isinstance(self.capacity, CapacitySchedule):
            done = self.capacity.serialize_end(now, q.wire_bytes * 8)
        else:
            done = self._next_opportunity_at(now)
        if done <= now:
            done = now + 1 if isinstance(self.capacity, CapacitySchedule) else now
        self._busy = True
        self._service_ends_at = done
        self._completion_ticket = self.engine.call_at(
            max(done, now), lambda: self._complete_service(q),
            EventKind.TIMER, target=self.name,
        )

    def _complete_service(self, q: _Queued) -> None:
        now = self.engine.now()
        self._busy = False
        self._completion_ticket = None
        if self.loss_rate > 0.0 and self.rng.random() < self.loss_rate:
            self.counters.loss_dropped += 1
        else:
            self.in_propagation += 1
            self.engine.call_at(
                now + self.one_way_delay_us, lambda: self._deliver(q),
                EventKind.DELIVERY, target=self.name,
            )
        if self.queue:
            self._start_service(now)
        else:
            self.on_writable()

    def _deliver(self, q: _Queued) -> None:
        now = self.engine.now()
        self.in_propagation -= 1
        if self.blackout_active_at(now):
            self.counters.blackout_dropped += 1
            return
        self.counters.delivered += 1
        self.on_deliver(q.item, now)

    # -- instrumentation ---------------------------------------------------------

    def residual_service(self, now: SimTime) -> SimTime:
        if not self._busy:
            return 0
        return max(0, self._service_ends_at - now)

    def still_queued(self) -> int:
        return len(self.queue) + (1 if self._busy else 0) + self.in_propagation

    def audit(self) -> None:
        """Conservation check: every packet handed in must be accounted for."""
        c = self.counters
        accounted = (
            c.delivered + c.tail_dropped + c.loss_dropped + c.blackout_dropped
            + self.still_queued()
        )
        if accounted != c.packets_in:
            raise AssertionError(
                f"{self.name}: conservation violated: in={c.packets_in} "
                f"accounted={accounted} ({c})"
            )
