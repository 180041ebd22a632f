"""Two-class egress scheduling: ingress AQM plus non-preemptive strict
priority, with a FIFO mode as the comparison baseline.

Command traffic always enters the high queue and is served to exhaustion
before any video packet; video is policed at ingestion (bounded queue,
optional freshness deadline) so the rate mismatch is absorbed by drops
instead of queue growth. The FIFO mode funnels everything through one
unbounded arrival-ordered queue, reproducing the coupling this design
removes.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, List, Optional, Tuple

from .engine import SimTime


class PacketClass(Enum):
    C2 = "c2"
    VIDEO = "video"


class Channel(Enum):
    RELIABLE_STREAM = "stream"
    UNRELIABLE_DATAGRAM = "datagram"


class SchedulerMode(Enum):
    STRICT_PRIORITY = "strict"
    FIFO = "fifo"


@dataclass
class Packet:
    cls: PacketClass
    seq: int                      # monotonic per class
    tx_time: SimTime              # stamped at creation by the source
    size_bytes: int               # application payload bytes
    deadline_age: Optional[SimTime] = None
    frame_seq: Optional[int] = None   # video only: all fragments share it
    frag_index: int = 0
    frag_total: int = 1


@dataclass
class SchedulerCounters:
    ingested_c2: int = 0
    ingested_video: int = 0
    dispatched_c2: int = 0
    dispatched_video: int = 0
    aqm_dropped: int = 0
    stale_dropped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class PriorityScheduler:
    """Ingestion AQM plus dispatch ordering for the two traffic classes.

    `clock` supplies the current virtual time for freshness checks.
    `stale_age_us <= 0` disables the freshness drop.
    """

    def __init__(
        self,
        mode: SchedulerMode,
        q_low_capacity_bytes: int,
        stale_age_us: SimTime = 200_000,
        clock: Callable[[], SimTime] = lambda: 0,
    ) -> None:
        self.mode = mode
        self.q_low_capacity_bytes = q_low_capacity_bytes
        self.stale_age_us = stale_age_us
        self._clock = clock
        self.q_high: Deque[Packet] = deque()
        self.q_low: Deque[Packet] = deque()
        self.q_low_occupancy = 0
        self._fifo: Deque[Packet] = deque()
        self.counters = SchedulerCounters()
        self._link = None  # set by the harness; used for residual_service

    # -- wiring ------------------------------------------------------------

    def attach_link(self, link) -> None:
        self._link = link

    # -- ingestion (AQM) ---------------------------------------------------

    def ingest(self, p: Packet) -> bool:
        if p.cls is PacketClass.C2:
            self.counters.ingested_c2 += 1
            if self.mode is SchedulerMode.FIFO:
                self._fifo.append(p)
            else:
                self.q_high.append(p)
            return True
        if p.cls is PacketClass.VIDEO:
            self.counters.ingested_video += 1
            if self.mode is SchedulerMode.FIFO:
                # baseline: one shared queue, no policing
                self._fifo.append(p)
                return True
            deadline = p.deadline_age if p.deadline_age is not None else (
                self.stale_age_us if self.stale_age_us > 0 else None
            )
            if deadline is not None and self._clock() - p.tx_time > deadline:
                self.counters.stale_dropped += 1
                return False
            if self.q_low_occupancy + p.size_bytes > self.q_low_capacity_bytes:
                self.counters.aqm_dropped += 1
                return False
            self.q_low.append(p)
            self.q_low_occupancy += p.size_bytes
            return True
        raise ValueError(f"unknown packet class: {p.cls!r}")

    # -- dispatch ----------------------------------------------------------

    def dispatch(self, budget_bytes: int) -> List[Tuple[Packet, Channel]]:
        """Emit whole packets in priority (or arrival) order within budget.

        A head packet larger than the remaining budget stops the loop: packets
        are never fragmented here and lower classes never overtake a blocked
        higher-class head.
        """
        out: List[Tuple[Packet, Channel]] = []
        if self.mode is SchedulerMode.FIFO:
            while self._fifo and self._fifo[0].size_bytes <= budget_bytes:
                p = self._fifo.popleft()
                budget_bytes -= p.size_bytes
                out.append((p, self._channel_for(p)))
                self._count_dispatch(p)
            return out
        while self.q_high and self.q_high[0].size_bytes <= budget_bytes:
            p = self.q_high.popleft()
            budget_bytes -= p.size_bytes
            out.append((p, Channel.RELIABLE_STREAM))
            self.counters.dispatched_c2 += 1
        if self.q_high:
            return out  # high head blocked on budget; nothing overtakes it
        while self.q_low and self.q_low[0].size_bytes <= budget_bytes:
            p = self.q_low.popleft()
            self.q_low_occupancy -= p.size_bytes
            budget_bytes -= p.size_bytes
            out.append((p, Channel.UNRELIABLE_DATAGRAM))
            self.counters.dispatched_video += 1
        return out

    def peek_next(self) -> Optional[Packet]:
        if self.mode is SchedulerMode.FIFO:
            return self._fifo[0] if self._fifo else None
        if self.q_high:
            return self.q_high[0]
        return self.q_low[0] if self.q_low else None

    def peek_high(self) -> Optional[Packet]:
        return self.q_high[0] if self.q_high else None

    def pop_high(self) -> Packet:
        p = self.q_high.popleft()
        self.counters.dispatched_c2 += 1
        return p

    def pending_bytes(self) -> int:
        if self.mode is SchedulerMode.FIFO:
            return sum(p.size_bytes for p in self._fifo)
        return sum(p.size_bytes for p in self.q_high) + self.q_low_occupancy

    def _channel_for(self, p: Packet) -> Channel:
        if p.cls is PacketClass.C2:
            return Channel.RELIABLE_STREAM
        return Channel.UNRELIABLE_DATAGRAM

    def _count_dispatch(self, p: Packet) -> None:
        if p.cls is PacketClass.C2:
            self.counters.dispatched_c2 += 1
        else:
            self.counters.dispatched_video += 1

    # -- instrumentation ---------------------------------------------------

    def residual_service(self, now: SimTime) -> SimTime:
        """Remaining transmission time of the packet occupying the bottleneck."""
        if self._link is None:
            return 0
        return self._link.residual_service(now)
