"""Delay-driven congestion controller with telemetry headroom.

The controller estimates queuing delay as the smoothed RTT minus a sliding
window minimum, tracks an adaptive delay target (a tolerance multiple of
the window minimum, floored at a base value), and moves the congestion
window additively below the target and multiplicatively above it. The
encoder feedback rate reserves a fixed command-traffic margin before
damping, and unused pacing allowance accrues as credits that let command
packets bypass a saturated window.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Optional, Tuple

from .engine import SimTime, US_PER_SEC
from .scheduler import PacketClass


class SendDecision(Enum):
    SEND = "send"
    SEND_VIA_CREDIT = "send-via-credit"
    BLOCKED = "blocked"


def decrease_factor(queue_delay_us: float, target_us: float, beta: float) -> float:
    """Multiplier applied to the window when delay exceeds the target.

    Always within (1 - beta, 1] because the relative excess is below 1.
    """
    return 1.0 - beta * (queue_delay_us - target_us) / queue_delay_us


class WindowedMin:
    """Exact sliding-window minimum over (time, value) samples.

    Monotonic deque; amortised O(1) per push. Samples older than the
    horizon fall out on push and on query.
    """

    def __init__(self, window_us: SimTime) -> None:
        self.window_us = window_us
        self._q: Deque[Tuple[SimTime, float]] = deque()

    def push(self, t: SimTime, value: float) -> None:
        q = self._q
        while q and q[-1][1] >= value:
            q.pop()
        q.append((t, value))
        self._evict(t)

    def _evict(self, now: SimTime) -> None:
        q = self._q
        horizon = now - self.window_us
        while q and q[0][0] < horizon:
            q.popleft()

    def minimum(self, now: SimTime) -> Optional[float]:
        self._evict(now)
        return self._q[0][1] if self._q else None


@dataclass
class CcaConfig:
    window_us: SimTime = 20 * US_PER_SEC      # RTT-minimum observation horizon
    kappa: float = 1.5                        # delay-target tolerance multiple
    beta: float = 0.5                         # multiplicative decrease strength
    gamma: float = 0.9                        # encoder feedback damping
    d_base_us: SimTime = 40_000               # delay-target floor
    r_safe_bps: int = 15_000                  # command-traffic headroom
    r_min_bps: int = 300_000
    r_max_bps: int = 10_000_000
    packet_size_bytes: int = 1_250            # additive-increase quantum
    initial_window_bytes: int = 12_500
    credit_cap_bytes: int = 0                 # 0 = track the current window

    def validate(self) -> None:
        if self.kappa < 1.0:
            raise ValueError("kappa must be >= 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.r_min_bps > self.r_max_bps:
            raise ValueError("r_min must not exceed r_max")
        if self.r_safe_bps < 0:
            raise ValueError("r_safe must be non-negative")
        if self.packet_size_bytes <= 0 or self.initial_window_bytes <= 0:
            raise ValueError("sizes must be positive")


class Controller:
    """Congestion state shared by both channels of one connection."""

    SRTT_GAIN = 0.125
    RATE_SMOOTHING_TAU_US = 300_000.0

    def __init__(self, cfg: CcaConfig) -> None:
        cfg.validate()
        self.cfg = cfg
        self.cwnd_bytes: float = float(max(cfg.initial_window_bytes,
                                           2 * cfg.packet_size_bytes))
        self.srtt_us: Optional[float] = None
        self.rtt_window = WindowedMin(cfg.window_us)
        self.bytes_in_flight = 0
        self.credits_bytes: float = 0.0
        self._last_decrease_at: SimTime = -(10 ** 12)
        self._r_tx_smooth_bps: Optional[float] = None
        self._r_tx_updated_at: Optional[SimTime] = None
        self._sent_since_accrual = 0
        self._last_accrual_at: Optional[SimTime] = None

    @property
    def cwnd_min_bytes(self) -> int:
        return 2 * self.cfg.packet_size_bytes

    def credit_cap(self) -> float:
        if self.cfg.credit_cap_bytes > 0:
            return float(self.cfg.credit_cap_bytes)
        return self.cwnd_bytes

    # -- estimators ---------------------------------------------------------

    def queue_delay_estimate(self, now: SimTime) -> Optional[float]:
        """Smoothed RTT minus the window minimum; None with no samples yet."""
        if self.srtt_us is None:
            return None
        floor = self.rtt_window.minimum(now)
        if floor is None:
            return None
        return max(0.0, self.srtt_us - floor)

    def target_delay(self, now: SimTime) -> Optional[float]:
        floor = self.rtt_window.minimum(now)
        if floor is None:
            return None
        return max(float(self.cfg.d_base_us), self.cfg.kappa * floor)

    def r_tx_instant_bps(self) -> Optional[float]:
        """Available transmit rate implied by the window and smoothed RTT."""
        if self.srtt_us is None or self.srtt_us <= 0:
            return None
        return self.cwnd_bytes * 8.0 * US_PER_SEC / self.srtt_us

    def r_tx_bps(self) -> Optional[float]:
        """Smoothed transmit-rate estimate (the value fed to the encoder)."""
        return self._r_tx_smooth_bps

    def encoder_rate(self) -> Optional[float]:
        """Headroom-reserved, damped, clamped rate to feed back to the encoder."""
        r_tx = self.r_tx_bps()
        if r_tx is None:
            return None
        raw = self.cfg.gamma * (r_tx - self.cfg.r_safe_bps)
        return float(max(self.cfg.r_min_bps, min(self.cfg.r_max_bps, raw)))

    # -- feedback -------------------------------------------------------------

    def on_ack(self, rtt_sample_us: float, bytes_acked: int, now: SimTime) -> None:
        if rtt_sample_us <= 0:
            raise ValueError("rtt sample must be positive")
        if self.srtt_us is None:
            self.srtt_us = float(rtt_sample_us)
        else:
            g = self.SRTT_GAIN
            self.srtt_us = (1.0 - g) * self.srtt_us + g * rtt_sample_us
        self.rtt_window.push(now, float(rtt_sample_us))
        self.bytes_in_flight = max(0, self.bytes_in_flight - bytes_acked)

        dq = self.queue_delay_estimate(now)
        target = self.target_delay(now)
        if dq is None or target is None:
            return
        if dq <= target:
            self.cwnd_bytes += self.cfg.packet_size_bytes * bytes_acked / self.cwnd_bytes
        else:
            # one multiplicative step per congestion epoch: act only on
            # evidence from a packet sent after the previous decrease,
            # otherwise per-ack compounding overshoots the fixed point
            sent_at = now - rtt_sample_us
            if sent_at >= self._last_decrease_at:
                self.cwnd_bytes *= decrease_factor(dq, target, self.cfg.beta)
                self._last_decrease_at = now
        if self.cwnd_bytes < self.cwnd_min_bytes:
            self.cwnd_bytes = float(self.cwnd_min_bytes)
        self._refresh_rate_estimate(now)

    def _refresh_rate_estimate(self, now: SimTime) -> None:
        inst = self.r_tx_instant_bps()
        if inst is None:
            return
        if self._r_tx_smooth_bps is None or self._r_tx_updated_at is None:
            self._r_tx_smooth_bps = inst
        else:
            dt = max(0, now - self._r_tx_updated_at)
            a = 1.0 - math.exp(-dt / self.RATE_SMOOTHING_TAU_US)
            self._r_tx_smooth_bps += a * (inst - self._r_tx_smooth_bps)
        self._r_tx_updated_at = now

    def on_loss_detected(self, bytes_lost: int) -> None:
        self.bytes_in_flight = max(0, self.bytes_in_flight - bytes_lost)

    # -- admission --------------------------------------------------------------

    def can_send(self, size_bytes: int, cls: PacketClass) -> SendDecision:
        if self.bytes_in_flight + size_bytes <= self.cwnd_bytes:
            return SendDecision.SEND
        if cls is PacketClass.C2 and self.credits_bytes >= size_bytes:
            self.credits_bytes -= size_bytes
            return SendDecision.SEND_VIA_CREDIT
        return SendDecision.BLOCKED

    def note_sent(self, size_bytes: int) -> None:
        self.bytes_in_flight += size_bytes
        self._sent_since_accrual += size_bytes

    def accrue_credit(self, now: SimTime) -> None:
        """Bank unused pacing allowance (window per smoothed RTT) as credits."""
        if self.srtt_us is None or self.srtt_us <= 0:
            return
        if self._last_accrual_at is None:
            self._last_accrual_at = now
            self._sent_since_accrual = 0
            return
        elapsed = now - self._last_accrual_at
        if elapsed <= 0:
            return
        allowed = self.cwnd_bytes * elapsed / self.srtt_us
        unused = allowed - self._sent_since_accrual
        if unused > 0:
            self.credits_bytes = min(self.credit_cap(), self.credits_bytes + unused)
        self._last_accrual_at = now
        self._sent_since_accrual = 0

    def snapshot(self, now: SimTime) -> dict:
        dq = self.queue_delay_estimate(now)
        target = self.target_delay(now)
        r_tx = self.r_tx_bps()
        r_enc = self.encoder_rate()
        return {
            "cwnd_bytes": self.cwnd_bytes,
            "srtt_ms": (self.srtt_us / 1000.0) if self.srtt_us is not None else None,
            "queue_delay_ms": (dq / 1000.0) if dq is not None else None,
            "target_delay_ms": (target / 1000.0) if target is not None else None,
            "r_tx_bps": r_tx,
            "r_enc_bps": r_enc,
            "credits_bytes": self.credits_bytes,
            "bytes_in_flight": self.bytes_in_flight,
        }
