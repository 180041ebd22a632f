"""Source models: a constant-rate command generator, a rate-adaptive video
frame generator that honors encoder feedback at frame boundaries, and a
Poisson packet source for queueing validation runs.

All sources stamp packets with a per-class monotonic sequence number and
the emission time; video frames are fragmented at the source so every
fragment fits the datagram limit.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional

from .engine import SimTime, US_PER_SEC
from .scheduler import Packet, PacketClass


class C2Source:
    """Emits fixed-size command packets at an exactly periodic rate."""

    def __init__(self, rate_hz: float, payload_bytes: int = 185) -> None:
        if rate_hz <= 0 or payload_bytes <= 0:
            raise ValueError("rate and payload must be positive")
        self.rate_hz = rate_hz
        self.payload_bytes = payload_bytes
        self.next_seq = 0

    def emission_time(self, index: int) -> SimTime:
        return int(index * US_PER_SEC / self.rate_hz)

    def next_emission_time(self) -> SimTime:
        return self.emission_time(self.next_seq)

    def tick(self, now: SimTime) -> List[Packet]:
        out: List[Packet] = []
        while self.emission_time(self.next_seq) <= now:
            t = self.emission_time(self.next_seq)
            out.append(Packet(PacketClass.C2, self.next_seq, t, self.payload_bytes))
            self.next_seq += 1
        return out


class VideoSource:
    """Frame-structured source: one frame per 1/fps, sized to the target
    bitrate with optional uniform jitter, fragmented to the datagram limit.

    Rate changes apply at the next frame boundary (one-frame actuation lag).
    """

    def __init__(
        self,
        fps: float,
        initial_bitrate_bps: float,
        max_fragment_bytes: int,
        jitter: float = 0.2,
        rng: Optional[random.Random] = None,
    ) -> None:
        if fps <= 0 or initial_bitrate_bps <= 0 or max_fragment_bytes <= 0:
            raise ValueError("fps, bitrate and fragment size must be positive")
        if not 0.0 <= jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")
        self.fps = fps
        self.target_bitrate_bps = float(initial_bitrate_bps)
        self._pending_rate: Optional[float] = None
        self.max_fragment_bytes = max_fragment_bytes
        self.jitter = jitter
        self.rng = rng or random.Random(0)
        self.next_frame_seq = 0
        self.next_packet_seq = 0
        self.frames_emitted = 0
        self.packets_emitted = 0

    def apply_rate(self, rate_bps: float) -> None:
        if rate_bps <= 0:
            raise ValueError("encoder rate must be positive (clamp upstream failed)")
        self._pending_rate = float(rate_bps)

    def mean_frame_bytes(self) -> float:
        return self.target_bitrate_bps / (8.0 * self.fps)

    def frame_time(self, index: int) -> SimTime:
        return int(index * US_PER_SEC / self.fps)

    def next_emission_time(self) -> SimTime:
        return self.frame_time(self.next_frame_seq)

    def tick(self, now: SimTime) -> List[Packet]:
        out: List[Packet] = []
        while self.frame_time(self.next_frame_seq) <= now:
            t = self.frame_time(self.next_frame_seq)
            if self._pending_rate is not None:
                self.target_bitrate_bps = self._pending_rate
                self._pending_rate = None
            size = self.mean_frame_bytes()
            if self.jitter > 0.0:
                size *= 1.0 + self.rng.uniform(-self.jitter, self.jitter)
            total = max(1, round(size))
            out.extend(self._fragment(total, t, self.next_frame_seq))
            self.next_frame_seq += 1
            self.frames_emitted += 1
        return out

    def _fragment(self, total_bytes: int, t: SimTime, frame_seq: int) -> List[Packet]:
        sizes: List[int] = []
        remaining = total_bytes
        while remaining > 0:
            chunk = min(remaining, self.max_fragment_bytes)
            sizes.append(chunk)
            remaining -= chunk
        frags: List[Packet] = []
        for i, chunk in enumerate(sizes):
            frags.append(Packet(
                PacketClass.VIDEO, self.next_packet_seq, t, chunk,
                frame_seq=frame_seq, frag_index=i, frag_total=len(sizes),
            ))
            self.next_packet_seq += 1
            self.packets_emitted += 1
        return frags


class PoissonPacketSource:
    """Memoryless video-class packet arrivals of fixed size; used to drive the
    scheduler with the arrival process the queueing oracle assumes."""

    def __init__(self, rate_pps: float, payload_bytes: int,
                 rng: Optional[random.Random] = None) -> None:
        if rate_pps <= 0 or payload_bytes <= 0:
            raise ValueError("rate and payload must be positive")
        self.rate_pps = rate_pps
        self.payload_bytes = payload_bytes
        self.rng = rng or random.Random(0)
        self.next_seq = 0
        self.packets_emitted = 0
        self._next_at: SimTime = round(self.rng.expovariate(rate_pps) * US_PER_SEC)

    def next_emission_time(self) -> SimTime:
        return self._next_at

    def tick(self, now: SimTime) -> List[Packet]:
        out: List[Packet] = []
        while self._next_at <= now:
            out.append(Packet(PacketClass.VIDEO, self.next_seq, self._next_at,
                              self.payload_bytes, frame_seq=self.next_seq))
            self.next_seq += 1
            self.packets_emitted += 1
            self._next_at += max(1, round(self.rng.expovariate(self.rate_pps) * US_PER_SEC))
        return out
