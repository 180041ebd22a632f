"""Measurement suite: per-class latency and loss accounting, windowed
throughput series, and the queueing-theory oracles used to cross-check the
scheduler.

The priority-queue oracle is a self-contained single-server simulation
(its own clock, queues and RNG) so it shares no code path with the
scheduler it validates.
"""
from __future__ import annotations

import math
import random
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .engine import SimTime, US_PER_SEC
from .scheduler import Packet, PacketClass


@dataclass
class LatencyRecord:
    cls: PacketClass
    seq: int
    t_tx: SimTime
    t_rx: SimTime

    @property
    def latency_us(self) -> SimTime:
        return self.t_rx - self.t_tx


@dataclass
class PlrAccumulator:
    expected_n: int = 0
    unique_received_m: int = 0
    duplicates: int = 0
    _seen: set = field(default_factory=set, repr=False)

    def record(self, seq: int) -> bool:
        """Count a reception; duplicates are flagged, not double counted."""
        if seq in self._seen:
            self.duplicates += 1
            return False
        self._seen.add(seq)
        self.unique_received_m += 1
        return True

    @property
    def plr(self) -> float:
        if self.expected_n == 0:
            return 0.0
        return 1.0 - self.unique_received_m / self.expected_n


class MetricsCollector:
    """Accumulates receive-side observations during a run."""

    def __init__(self) -> None:
        self.records: Dict[PacketClass, List[LatencyRecord]] = {
            PacketClass.C2: [], PacketClass.VIDEO: []}
        self.plr: Dict[PacketClass, PlrAccumulator] = {
            PacketClass.C2: PlrAccumulator(), PacketClass.VIDEO: PlrAccumulator()}
        self.delivery_log: List[Tuple[SimTime, PacketClass, int]] = []
        self._frames: Dict[int, dict] = {}
        self.frame_latencies_us: List[SimTime] = []
        self.frames_delivered = 0
        self.last_delivery_us: Optional[SimTime] = None

    def record_rx(self, p: Packet, now: SimTime) -> None:
        if now < p.tx_time:
            raise AssertionError("reception before transmission")
        self.last_delivery_us = now
        self.delivery_log.append((now, p.cls, p.size_bytes))
        if not self.plr[p.cls].record(p.seq):
            return
        self.records[p.cls].append(LatencyRecord(p.cls, p.seq, p.tx_time, now))
        if p.cls is PacketClass.VIDEO and p.frame_seq is not None:
            st = self._frames.setdefault(p.frame_seq,
                                         {"got": 0, "total": p.frag_total,
                                          "tx": p.tx_time})
            st["got"] += 1
            if st["got"] == st["total"]:
                # frame latency counts from emission to its last fragment
                self.frames_delivered += 1
                self.frame_latencies_us.append(now - st["tx"])

    def set_expected(self, cls: PacketClass, n: int) -> None:
        self.plr[cls].expected_n = n

    # -- series ----------------------------------------------------------------

    def throughput_series(
        self,
        window_us: SimTime,
        t_end_us: SimTime,
        capacity_fn: Optional[Callable[[SimTime], float]] = None,
    ) -> List[Tuple[float, float, float, float]]:
        """Per-window delivered rates: rows of (t_ms, c2_bps, video_bps, cap_bps).

        The window stamp is its start; capacity is sampled at the window
        midpoint of the piecewise schedule.
        """
        n_windows = max(1, math.ceil(t_end_us / window_us))
        c2 = [0] * n_windows
        vid = [0] * n_windows
        for (t, cls, nbytes) in self.delivery_log:
            idx = min(n_windows - 1, t // window_us)
            if cls is PacketClass.C2:
                c2[idx] += nbytes
            else:
                vid[idx] += nbytes
        rows = []
        for i in range(n_windows):
            t_ms = i * window_us / 1000.0
            scale = 8.0 * US_PER_SEC / window_us
            cap = capacity_fn(int((i + 0.5) * window_us)) if capacity_fn else 0.0
            rows.append((t_ms, c2[i] * scale, vid[i] * scale, cap))
        return rows

    # -- summaries --------------------------------------------------------------

    @staticmethod
    def _latency_stats(samples_us: List[SimTime]) -> dict:
        if not samples_us:
            return {"count": 0}
        s = sorted(samples_us)
        n = len(s)

        def pct(p: float) -> float:
            return s[min(n - 1, int(p * n))] / 1000.0

        return {
            "count": n,
            "mean_ms": sum(s) / n / 1000.0,
            "p50_ms": pct(0.50),
            "p95_ms": pct(0.95),
            "p99_ms": pct(0.99),
            "max_ms": s[-1] / 1000.0,
        }

    def summary(self) -> dict:
        out = {}
        for cls in (PacketClass.C2, PacketClass.VIDEO):
            acc = self.plr[cls]
            out[cls.value] = {
                "expected": acc.expected_n,
                "unique_received": acc.unique_received_m,
                "duplicates": acc.duplicates,
                "plr": acc.plr,
                "latency": self._latency_stats(
                    [r.latency_us for r in self.records[cls]]),
            }
        out["video_frames"] = {
            "delivered": self.frames_delivered,
            "latency": self._latency_stats(self.frame_latencies_us),
        }
        return out


# -- queueing oracles ------------------------------------------------------------


@dataclass
class QueueOracleParams:
    lambda_c2: float              # command arrivals per second
    lambda_vid: float             # video arrivals per second
    mean_service_s: float         # mean transmission time of one packet
    residual_s: float             # mean residual service seen at arrival

    @property
    def mu(self) -> float:
        return 1.0 / self.mean_service_s

    @property
    def rho_c2(self) -> float:
        return self.lambda_c2 * self.mean_service_s

    @property
    def rho_total(self) -> float:
        return (self.lambda_c2 + self.lambda_vid) * self.mean_service_s


def priority_wait_prediction(params: QueueOracleParams) -> float:
    """Closed-form mean wait for the high class of a non-preemptive
    two-class priority server: own-class backlog plus residual service."""
    rho = params.rho_c2
    if rho >= 1.0:
        raise ValueError(f"high-class load {rho:.3f} >= 1; prediction undefined")
    return rho * params.mean_service_s / (1.0 - rho) + params.residual_s


# Backwards-friendly alias used by the report code.
eq1_prediction = priority_wait_prediction


@dataclass
class OracleResult:
    mean_wait_s: float
    mean_sojourn_s: float
    n_samples: int


def mm_priority_oracle(
    lambda_c2: float,
    lambda_vid: float,
    mean_service_s: float,
    duration_s: float,
    seed: int = 1,
    c2_arrivals: str = "deterministic",      # "deterministic" | "poisson"
    video_arrivals: str = "poisson",
    service: str = "deterministic",          # "deterministic" | "exponential"
    warmup_s: float = 0.0,
) -> OracleResult:
    """Standalone non-preemptive two-class priority queue simulation.

    High-class (command) waits are measured for arrivals inside
    [warmup, duration); the run continues past `duration` until all of
    them have started service. Ties between a service completion and an
    arrival resolve completion-first.
    """
    if lambda_c2 <= 0:
        raise ValueError("no high-class arrivals: mean wait undefined")
    rng = random.Random(seed)

    def draw_service() -> float:
        if service == "deterministic":
            return mean_service_s
        return rng.expovariate(1.0 / mean_service_s)

    def next_c2_gap() -> float:
        if c2_arrivals == "deterministic":
            return 1.0 / lambda_c2
        return rng.expovariate(lambda_c2)

    def next_vid_gap() -> float:
        return rng.expovariate(lambda_vid)

    inf = math.inf
    next_c2 = 0.0 if c2_arrivals == "deterministic" else rng.expovariate(lambda_c2)
    next_vid = next_vid_gap() if lambda_vid > 0 else inf
    completion = inf
    busy = False
    high_q: List[float] = []   # arrival times (FIFO via index)
    high_head = 0
    vid_backlog = 0
    wait_sum = 0.0
    n = 0

    def start_next(now: float) -> None:
        nonlocal busy, completion, high_head, vid_backlog, wait_sum, n
        if high_head < len(high_q):
            arr = high_q[high_head]
            high_head += 1
            if warmup_s <= arr < duration_s:
                wait_sum += now - arr
                n += 1
            busy = True
            completion = now + draw_service()
        elif vid_backlog > 0:
            vid_backlog -= 1
            busy = True
            completion = now + draw_service()
        else:
            busy = False
            completion = inf

    while True:
        if next_c2 == inf and high_head >= len(high_q):
            break  # every measured command packet has started service
        t = min(completion, next_c2, next_vid)
        if t == inf:
            break
        if completion <= t:
            start_next(completion)
            continue
        if next_c2 <= next_vid:
            if next_c2 >= duration_s:
                next_c2 = inf
                continue
            high_q.append(next_c2)
            if not busy:
                start_next(next_c2)
            next_c2 += next_c2_gap()
        else:
            if next_vid >= duration_s:
                next_vid = inf
                continue
            vid_backlog += 1
            if not busy:
                start_next(next_vid)
            next_vid += next_vid_gap()

    if n == 0:
        raise ValueError("no high-class samples inside the measurement window")
    mean_wait = wait_sum / n
    return OracleResult(mean_wait, mean_wait + mean_service_s, n)
