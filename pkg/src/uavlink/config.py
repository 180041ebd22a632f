"""Declarative scenario configuration.

Scenarios are flat `key = value` files with dotted keys (diff-friendly for
experiment matrices). Every key has a documented default; unknown keys are
rejected with the offending key path. The fully resolved mapping is echoed
into every report for provenance.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .engine import US_PER_MS, US_PER_SEC, SimTime
from .link import CapacitySchedule, LinkTrace, RateStep, load_trace
from .scheduler import SchedulerMode
from .transport import ResumptionMode


class ConfigError(ValueError):
    pass


@dataclass
class HandoverSpec:
    start_s: float
    t_phy_ms: float
    mode: Optional[str] = None  # overrides transport.resumption_mode


@dataclass
class ScenarioConfig:
    duration_s: float = 30.0
    seed: int = 1

    # link
    link_rate_mbps: str = "5"            # "R" or "t0:R0,t1:R1,..." (s:Mbps)
    link_trace_path: str = ""            # overrides rate when set
    link_delay_ms: float = 60.0
    link_loss: float = 0.0
    link_queue_bytes: int = 0            # 0 = 250 ms at the initial rate
    link_mtu_bytes: int = 1500
    link_handovers: str = ""             # "start_s:t_phy_ms[:mode];..."

    # scheduler
    scheduler_mode: str = "strict"       # strict | fifo
    scheduler_q_low_bytes: int = 0       # 0 = two mean video frames
    scheduler_stale_ms: float = 200.0    # <= 0 disables freshness drop

    # congestion controller
    cca_window_s: float = 20.0
    cca_kappa: float = 1.5
    cca_beta: float = 0.5
    cca_gamma: float = 0.9
    cca_d_base_ms: float = 40.0
    cca_r_safe_kbps: float = 15.0
    cca_r_min_kbps: float = 300.0
    cca_r_max_kbps: float = 10000.0
    cca_packet_size: int = 1250
    cca_initial_window_bytes: int = 12500
    cca_credit_cap_bytes: int = 0        # 0 = track current window

    # transport
    transport_resumption_mode: str = "zero_rtt"   # zero_rtt | full | tcp_tls
    transport_handshake_rtts: int = -1            # -1 = per-mode default
    transport_max_datagram_size: int = 1400
    transport_freshness_s: float = 3.0
    transport_unified: bool = True
    transport_dispatch_gate: str = "window"       # window | serializer
    transport_c2_channel: str = "stream"          # stream | datagram

    # traffic
    c2_rate_hz: float = 10.0
    c2_payload_bytes: int = 185
    video_fps: float = 30.0
    video_initial_kbps: float = 3000.0
    video_jitter: float = 0.2
    video_arrival: str = "frames"        # frames | poisson
    video_poisson_pps: float = 0.0
    video_packet_bytes: int = 0          # poisson mode payload; 0 = datagram max

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if not 0.0 <= self.link_loss <= 1.0:
            raise ConfigError("link.loss must lie in [0, 1]")
        if self.scheduler_mode not in ("strict", "fifo"):
            raise ConfigError(f"scheduler.mode: unknown mode {self.scheduler_mode!r}")
        if self.transport_dispatch_gate not in ("window", "serializer"):
            raise ConfigError(
                f"transport.dispatch_gate: unknown gate {self.transport_dispatch_gate!r}")
        if self.transport_c2_channel not in ("stream", "datagram"):
            raise ConfigError(
                f"transport.c2_channel: unknown channel {self.transport_c2_channel!r}")
        if self.transport_resumption_mode not in ("zero_rtt", "full", "tcp_tls"):
            raise ConfigError(
                f"transport.resumption_mode: unknown mode "
                f"{self.transport_resumption_mode!r}")
        if self.video_arrival not in ("frames", "poisson"):
            raise ConfigError(f"video.arrival: unknown model {self.video_arrival!r}")
        if self.video_arrival == "poisson" and self.video_poisson_pps <= 0:
            raise ConfigError("video.poisson_pps must be positive in poisson mode")
        self.rate_schedule()     # parse errors surface here
        self.handovers()

    # -- derived pieces -----------------------------------------------------------

    def rate_schedule(self) -> CapacitySchedule:
        steps: List[RateStep] = []
        for part in self.link_rate_mbps.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                t_s, rate = part.split(":", 1)
            else:
                t_s, rate = "0", part
            try:
                steps.append(RateStep(round(float(t_s) * US_PER_SEC),
                                      round(float(rate) * 1e6)))
            except ValueError:
                raise ConfigError(f"link.rate_mbps: cannot parse step {part!r}") from None
        if not steps:
            raise ConfigError("link.rate_mbps is empty")
        try:
            return CapacitySchedule(steps)
        except ValueError as e:
            raise ConfigError(f"link.rate_mbps: {e}") from None

    def handovers(self) -> List[HandoverSpec]:
        out: List[HandoverSpec] = []
        for part in self.link_handovers.split(";"):
            part = part.strip()
            if not part:
                continue
            bits = part.split(":")
            if len(bits) not in (2, 3):
                raise ConfigError(f"link.handovers: cannot parse entry {part!r}")
            try:
                spec = HandoverSpec(float(bits[0]), float(bits[1]),
                                    bits[2] if len(bits) == 3 else None)
            except ValueError:
                raise ConfigError(f"link.handovers: cannot parse entry {part!r}") from None
            if spec.mode is not None and spec.mode not in ("zero_rtt", "full", "tcp_tls"):
                raise ConfigError(f"link.handovers: unknown mode {spec.mode!r}")
            out.append(spec)
        return out

    def initial_rate_bps(self) -> int:
        return self.rate_schedule().steps[0].rate_bps

    def queue_bytes(self) -> int:
        if self.link_queue_bytes > 0:
            return self.link_queue_bytes
        return max(self.link_mtu_bytes + 1,
                   round(self.initial_rate_bps() * 0.250 / 8))

    def q_low_bytes(self) -> int:
        if self.scheduler_q_low_bytes > 0:
            return self.scheduler_q_low_bytes
        mean_frame = self.video_initial_kbps * 1000 / (8 * self.video_fps)
        return max(2 * self.transport_max_datagram_size, round(2 * mean_frame))

    def resumption_mode(self) -> ResumptionMode:
        return ResumptionMode(self.transport_resumption_mode)

    def scheduler_mode_enum(self) -> SchedulerMode:
        return SchedulerMode.STRICT_PRIORITY if self.scheduler_mode == "strict" \
            else SchedulerMode.FIFO

    def resolved_flat(self) -> Dict[str, object]:
        out = {}
        for attr, key in _KEY_BY_ATTR.items():
            out[key] = getattr(self, attr)
        return dict(sorted(out.items()))


_KEY_BY_ATTR = {
    "duration_s": "duration_s",
    "seed": "seed",
    "link_rate_mbps": "link.rate_mbps",
    "link_trace_path": "link.trace_path",
    "link_delay_ms": "link.delay_ms",
    "link_loss": "link.loss",
    "link_queue_bytes": "link.queue_bytes",
    "link_mtu_bytes": "link.mtu_bytes",
    "link_handovers": "link.handovers",
    "scheduler_mode": "scheduler.mode",
    "scheduler_q_low_bytes": "scheduler.q_low_bytes",
    "scheduler_stale_ms": "scheduler.stale_ms",
    "cca_window_s": "cca.window_s",
    "cca_kappa": "cca.kappa",
    "cca_beta": "cca.beta",
    "cca_gamma": "cca.gamma",
    "cca_d_base_ms": "cca.d_base_ms",
    "cca_r_safe_kbps": "cca.r_safe_kbps",
    "cca_r_min_kbps": "cca.r_min_kbps",
    "cca_r_max_kbps": "cca.r_max_kbps",
    "cca_packet_size": "cca.packet_size",
    "cca_initial_window_bytes": "cca.initial_window_bytes",
    "cca_credit_cap_bytes": "cca.credit_cap_bytes",
    "transport_resumption_mode": "transport.resumption_mode",
    "transport_handshake_rtts": "transport.handshake_rtts",
    "transport_max_datagram_size": "transport.max_datagram_size",
    "transport_freshness_s": "transport.freshness_s",
    "transport_unified": "transport.unified",
    "transport_dispatch_gate": "transport.dispatch_gate",
    "transport_c2_channel": "transport.c2_channel",
    "c2_rate_hz": "c2.rate_hz",
    "c2_payload_bytes": "c2.payload_bytes",
    "video_fps": "video.fps",
    "video_initial_kbps": "video.initial_kbps",
    "video_jitter": "video.jitter",
    "video_arrival": "video.arrival",
    "video_poisson_pps": "video.poisson_pps",
    "video_packet_bytes": "video.packet_bytes",
}

_ATTR_BY_KEY = {key: attr for attr, key in _KEY_BY_ATTR.items()}

_BOOL_KEYS = {"transport.unified"}
_INT_KEYS = {
    "seed", "link.queue_bytes", "link.mtu_bytes", "scheduler.q_low_bytes",
    "cca.packet_size", "cca.initial_window_bytes", "cca.credit_cap_bytes",
    "transport.handshake_rtts", "transport.max_datagram_size",
    "c2.payload_bytes", "video.packet_bytes",
}
_STR_KEYS = {
    "link.rate_mbps", "link.trace_path", "link.handovers", "scheduler.mode",
    "transport.resumption_mode", "transport.dispatch_gate",
    "transport.c2_channel", "video.arrival",
}


def _coerce(key: str, raw: str) -> object:
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None


def parse_scenario_text(text: str, overrides: Optional[Dict[str, str]] = None
                        ) -> ScenarioConfig:
    cfg = ScenarioConfig()
    assigned = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _ATTR_BY_KEY:
            raise ConfigError(f"line {lineno}: unknown key: {key}")
        assigned[key] = value
    for key, value in (overrides or {}).items():
        if key not in _ATTR_BY_KEY:
            raise ConfigError(f"unknown key: {key}")
        assigned[key] = value
    for key, value in assigned.items():
        setattr(cfg, _ATTR_BY_KEY[key], _coerce(key, str(value)))
    cfg.validate()
    return cfg


def parse_scenario_file(path: str, overrides: Optional[Dict[str, str]] = None
                        ) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path!r}: {e}") from None
    return parse_scenario_text(text, overrides)
