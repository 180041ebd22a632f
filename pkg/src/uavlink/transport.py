"""Channel semantics over one congestion context.

Command packets ride a reliable ordered stream (ARQ retransmission until
acknowledged, in-order delivery); video rides fire-and-forget datagrams
whose loss is inferred from feedback gaps and never repaired. Both debit
the same controller, so feedback from either channel throttles the whole
connection. Handovers black the radio out for the physical switching
time, then run a configurable number of handshake round trips plus one
path-validation round before application data resumes; the receiver-side
replay guard drops duplicate or stale command payloads that a replayed
resumption packet could carry.
"""
from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional

from .congestion import Controller, SendDecision
from .engine import Engine, Event, EventKind, SimTime, US_PER_MS
from .link import LinkModel
from .scheduler import Channel, Packet, PacketClass, PriorityScheduler

# -- wire format ---------------------------------------------------------------
# channel:1  class:1  seq:8  tx_time_us:8  payload_len:2   (little endian)

_HEADER = struct.Struct("<BBQQH")
WIRE_HEADER_BYTES = _HEADER.size  # 20

_CHANNEL_CODE = {Channel.RELIABLE_STREAM: 0, Channel.UNRELIABLE_DATAGRAM: 1}
_CHANNEL_FROM = {v: k for k, v in _CHANNEL_CODE.items()}
_CLASS_CODE = {PacketClass.C2: 0, PacketClass.VIDEO: 1}
_CLASS_FROM = {v: k for k, v in _CLASS_CODE.items()}


def encode_header(channel: Channel, cls: PacketClass, seq: int,
                  tx_time_us: int, payload_len: int) -> bytes:
    return _HEADER.pack(_CHANNEL_CODE[channel], _CLASS_CODE[cls],
                        seq, tx_time_us, payload_len)


@dataclass(frozen=True)
class HeaderFields:
    channel: Channel
    cls: PacketClass
    seq: int
    tx_time_us: int
    payload_len: int


def decode_header(data: bytes) -> HeaderFields:
    ch, cl, seq, tx, ln = _HEADER.unpack(data[:WIRE_HEADER_BYTES])
    return HeaderFields(_CHANNEL_FROM[ch], _CLASS_FROM[cl], seq, tx, ln)


# -- frames ----------------------------------------------------------------------


@dataclass
class DataFrame:
    channel: Channel
    packet: Packet
    txn_id: int
    header: bytes
    is_retransmit: bool = False

    @property
    def wire_bytes(self) -> int:
        return WIRE_HEADER_BYTES + self.packet.size_bytes


@dataclass
class CtrlFrame:
    kind: str            # "handshake" | "validate"
    round_index: int
    sent_at: SimTime
    wire_bytes: int = 64


@dataclass
class StreamAck:
    cum_seq: int      # highest seq with all predecessors received
    seq: int          # the segment this ack answers
    txn_id: int
    rx_time: SimTime


@dataclass
class DgramFeedback:
    txn_id: int
    rx_time: SimTime


# -- connection state ---------------------------------------------------------------


class Phase(Enum):
    ESTABLISHED = "established"
    BLACKOUT = "blackout"
    HANDSHAKING = "handshaking"
    RESUMING = "resuming"


class ResumptionMode(Enum):
    ZERO_RTT = "zero_rtt"
    FULL = "full"
    TCP_TLS = "tcp_tls"


DEFAULT_HANDSHAKE_RTTS = {
    ResumptionMode.ZERO_RTT: 0,
    ResumptionMode.FULL: 1,
    ResumptionMode.TCP_TLS: 2,
}


class TransportContractError(RuntimeError):
    pass


@dataclass
class HandoverRecord:
    start_us: SimTime
    t_phy_us: SimTime
    requested_mode: ResumptionMode
    effective_mode: ResumptionMode
    handshake_rtts: int
    fell_back: bool = False
    last_delivery_before_us: Optional[SimTime] = None
    first_confirmed_after_us: Optional[SimTime] = None

    @property
    def w_cb_us(self) -> Optional[SimTime]:
        if self.last_delivery_before_us is None or self.first_confirmed_after_us is None:
            return None
        return self.first_confirmed_after_us - self.last_delivery_before_us

    def as_dict(self) -> dict:
        return {
            "start_ms": self.start_us / 1000.0,
            "t_phy_ms": self.t_phy_us / 1000.0,
            "requested_mode": self.requested_mode.value,
            "effective_mode": self.effective_mode.value,
            "handshake_rtts": self.handshake_rtts,
            "fell_back": self.fell_back,
            "w_cb_ms": (self.w_cb_us / 1000.0) if self.w_cb_us is not None else None,
        }


# -- replay guard ----------------------------------------------------------------


class ReplayResult(Enum):
    ACCEPT = "accept"
    DISCARD_DUPLICATE = "discard-duplicate"
    DISCARD_STALE = "discard-stale"


class ReplayGuard:
    """Application-layer defense for command payloads carried in resumed
    connections: accepted sequence numbers must strictly increase and the
    embedded timestamp must be fresh. Rejections are silent by design."""

    def __init__(self, freshness_horizon_us: SimTime) -> None:
        self.freshness_horizon_us = freshness_horizon_us
        self.highest_seq_accepted = -1
        self.duplicates = 0
        self.stale = 0

    def check(self, seq: int, tx_time_us: SimTime, now: SimTime) -> ReplayResult:
        if seq <= self.highest_seq_accepted:
            self.duplicates += 1
            return ReplayResult.DISCARD_DUPLICATE
        if now - tx_time_us > self.freshness_horizon_us:
            self.stale += 1
            return ReplayResult.DISCARD_STALE
        self.highest_seq_accepted = seq
        return ReplayResult.ACCEPT


# -- segment bookkeeping -----------------------------------------------------------


@dataclass
class _Txn:
    txn_id: int
    seq: int
    bytes: int            # payload bytes (in-flight accounting unit)
    sent_at: SimTime
    is_retransmit: bool
    controlled: bool      # debited against the shared window
    post_recovery_marker: int


@dataclass
class _Segment:
    packet: Packet
    acked: bool = False
    retransmits: int = 0
    live_txn: Optional[int] = None


class UnifiedTransport:
    """Sender-side endpoint: admission, channel send paths, ARQ, recovery."""

    RTO_FLOOR_US = 25_000
    CTRL_RETRY_US = 100_000
    DGRAM_SWEEP_US = 100_000

    def __init__(
        self,
        engine: Engine,
        scheduler: PriorityScheduler,
        cca: Controller,
        link: LinkModel,
        max_datagram_size: int,
        resumption_mode: ResumptionMode = ResumptionMode.ZERO_RTT,
        handshake_rtts: Optional[int] = None,
        unified: bool = True,
        dispatch_gate: str = "window",            # "window" | "serializer"
        c2_channel: Channel = Channel.RELIABLE_STREAM,
        session_ticket: bool = True,
    ) -> None:
        if max_datagram_size + WIRE_HEADER_BYTES > link.mtu_bytes:
            raise ValueError(
                f"max_datagram_size {max_datagram_size} plus {WIRE_HEADER_BYTES} B "
                f"header exceeds link MTU {link.mtu_bytes}"
            )
        if dispatch_gate not in ("window", "serializer"):
            raise ValueError(f"unknown dispatch gate: {dispatch_gate!r}")
        self.engine = engine
        self.scheduler = scheduler
        self.cca = cca
        self.link = link
        self.max_datagram_size = max_datagram_size
        self.resumption_mode = resumption_mode
        self.handshake_rtts_override = handshake_rtts
        self.unified = unified
        self.dispatch_gate = dispatch_gate
        self.c2_channel = c2_channel
        self.session_ticket = session_ticket

        self.phase = Phase.ESTABLISHED
        self._txn_counter = 0
        self._txns: Dict[int, _Txn] = {}
        self._segments: Dict[int, _Segment] = {}   # stream seq -> segment
        self._unacked: Deque[int] = deque()        # stream seqs awaiting ack
        self._dgram_order: Deque[int] = deque()    # txn ids, send order
        self._rto_ticket: Optional[Event] = None
        self._rto_backoff = 1
        self._ctrl_ticket: Optional[Event] = None
        self._recovery_marker = 0                  # bumps at each recovery
        self._handshake_rounds_left = 0

        self.handover_records: List[HandoverRecord] = []
        self._pending_handovers: Deque[HandoverRecord] = deque()
        self._active_handover: Optional[HandoverRecord] = None
        self._expected_ctrl: Optional[tuple] = None

        self.last_delivery_probe: Callable[[], Optional[SimTime]] = lambda: None
        self.dgrams_sent = 0
        self.stream_segments_sent = 0
        self.retransmissions = 0

        self.link.on_writable = self._on_link_writable
        self.link.on_blackout = self._on_blackout
        self._sweep_ticket: Optional[Event] = None
        self._schedule_sweep()

    # -- admission + pump -------------------------------------------------------

    def on_app_packet(self, p: Packet) -> bool:
        accepted = self.scheduler.ingest(p)
        if accepted:
            self.pump()
        return accepted

    def _on_link_writable(self) -> None:
        self.pump()

    def _admit(self, p: Packet) -> Optional[SendDecision]:
        controlled = self.unified or p.cls is PacketClass.C2
        if not controlled:
            return SendDecision.SEND
        return self.cca.can_send(p.size_bytes, p.cls)

    def pump(self) -> None:
        """Drain the scheduler into the link as far as gating allows."""
        if self.phase is not Phase.ESTABLISHED:
            return
        while True:
            if self.dispatch_gate == "serializer" and not self.link.writable():
                return
            p = self.scheduler.peek_next()
            if p is None:
                return
            decision = self._admit(p)
            if decision is SendDecision.BLOCKED:
                return
            popped = self._pop_scheduled(p)
            self._transmit(popped, decision)

    def _pop_scheduled(self, peeked: Packet) -> Packet:
        sch = self.scheduler
        if sch.mode.value == "fifo":
            p = sch._fifo.popleft()
            sch._count_dispatch(p)
            return p
        if sch.q_high and sch.q_high[0] is peeked:
            return sch.pop_high()
        p = sch.q_low.popleft()
        sch.q_low_occupancy -= p.size_bytes
        sch.counters.dispatched_video += 1
        return p

    # -- channel sends ------------------------------------------------------------

    def _next_txn(self, seq: int, nbytes: int, is_rtx: bool, controlled: bool) -> _Txn:
        self._txn_counter += 1
        txn = _Txn(self._txn_counter, seq, nbytes, self.engine.now(), is_rtx,
                   controlled, self._recovery_marker)
        self._txns[txn.txn_id] = txn
        return txn

    def _transmit(self, p: Packet, decision: SendDecision) -> None:
        channel = self.c2_channel if p.cls is PacketClass.C2 else Channel.UNRELIABLE_DATAGRAM
        if channel is Channel.RELIABLE_STREAM:
            self.stream_send(p, decision)
        else:
            self.dgram_send(p, decision)

    def stream_send(self, p: Packet, decision: SendDecision = SendDecision.SEND) -> None:
        seg = self._segments.get(p.seq)
        if seg is None:
            seg = _Segment(p)
            self._segments[p.seq] = seg
            self._unacked.append(p.seq)
        self.stream_segments_sent += 1
        controlled = True
        txn = self._next_txn(p.seq, p.size_bytes, seg.retransmits > 0, controlled)
        seg.live_txn = txn.txn_id
        frame = DataFrame(Channel.RELIABLE_STREAM, p, txn.txn_id,
                          encode_header(Channel.RELIABLE_STREAM, p.cls, p.seq,
                                        p.tx_time, p.size_bytes),
                          is_retransmit=seg.retransmits > 0)
        if self.phase is Phase.ESTABLISHED:
            self.link.send(frame, frame.wire_bytes, self.engine.now())
        self.cca.note_sent(p.size_bytes)
        self._arm_rto()

    def dgram_send(self, p: Packet, decision: SendDecision = SendDecision.SEND) -> None:
        if p.size_bytes > self.max_datagram_size:
            raise TransportContractError(
                f"datagram payload {p.size_bytes} B exceeds max_datagram_size "
                f"{self.max_datagram_size} B"
            )
        controlled = self.unified or p.cls is PacketClass.C2
        txn = self._next_txn(p.seq, p.size_bytes, False, controlled)
        self._dgram_order.append(txn.txn_id)
        frame = DataFrame(Channel.UNRELIABLE_DATAGRAM, p, txn.txn_id,
                          encode_header(Channel.UNRELIABLE_DATAGRAM, p.cls, p.seq,
                                        p.tx_time, p.size_bytes))
        self.dgrams_sent += 1
        self.link.send(frame, frame.wire_bytes, self.engine.now())
        if controlled:
            self.cca.note_sent(p.size_bytes)

    # -- feedback ----------------------------------------------------------------

    def on_stream_ack(self, ack: StreamAck) -> None:
        if self.phase is not Phase.ESTABLISHED:
            return
        now = self.engine.now()
        newly_acked = 0
        sample: Optional[float] = None
        confirmed_post_recovery = False

        def settle(seq: int) -> None:
            nonlocal newly_acked, sample, confirmed_post_recovery
            seg = self._segments.get(seq)
            if seg is None or seg.acked:
                return
            seg.acked = True
            newly_acked += seg.packet.size_bytes
            if seg.live_txn is not None:
                txn = self._txns.pop(seg.live_txn, None)
                if txn is not None:
                    if seq == ack.seq and not txn.is_retransmit and seg.retransmits == 0:
                        sample = float(now - txn.sent_at)
                    if txn.post_recovery_marker == self._recovery_marker \
                            and self._recovery_marker > 0:
                        confirmed_post_recovery = True
                seg.live_txn = None

        settle(ack.seq)
        while self._unacked and self._unacked[0] <= ack.cum_seq:
            settle(self._unacked.popleft())
        self._unacked = deque(s for s in self._unacked
                              if not self._segments[s].acked)
        if newly_acked:
            self._rto_backoff = 1
            if sample is not None:
                self.cca.on_ack(sample, newly_acked, now)
            else:
                self.cca.on_loss_detected(newly_acked)  # release without a sample
            if confirmed_post_recovery:
                self._mark_first_confirmed(now)
        self._arm_rto()
        self.pump()

    def on_dgram_feedback(self, fb: DgramFeedback) -> None:
        if self.phase is not Phase.ESTABLISHED:
            return
        now = self.engine.now()
        # FIFO link: anything sent before the acknowledged datagram is gone
        while self._dgram_order and self._dgram_order[0] < fb.txn_id:
            lost = self._txns.pop(self._dgram_order.popleft(), None)
            if lost is not None and lost.controlled:
                self.cca.on_loss_detected(lost.bytes)
        if self._dgram_order and self._dgram_order[0] == fb.txn_id:
            self._dgram_order.popleft()
        txn = self._txns.pop(fb.txn_id, None)
        if txn is not None:
            if txn.controlled:
                self.cca.on_ack(float(now - txn.sent_at), txn.bytes, now)
            if txn.post_recovery_marker == self._recovery_marker and self._recovery_marker > 0:
                self._mark_first_confirmed(now)
        self.pump()

    def _mark_first_confirmed(self, now: SimTime) -> None:
        rec = self._active_handover
        if rec is not None and rec.first_confirmed_after_us is None:
            rec.first_confirmed_after_us = now
            self._active_handover = None

    # -- retransmission ------------------------------------------------------------

    def _rto_interval(self) -> SimTime:
        srtt = self.cca.srtt_us or float(self.RTO_FLOOR_US)
        return round(max(2.0 * srtt, self.RTO_FLOOR_US) * self._rto_backoff)

    def _arm_rto(self) -> None:
        if self._rto_ticket is not None:
            self.engine.cancel(self._rto_ticket)
            self._rto_ticket = None
        if not self._unacked:
            return
        self._rto_ticket = self.engine.call_at(
            self.engine.now() + self._rto_interval(), self._on_rto,
            EventKind.TIMER, target="transport.rto",
        )

    def _on_rto(self) -> None:
        self._rto_ticket = None
        if not self._unacked:
            return
        if self.phase is not Phase.ESTABLISHED:
            return  # recovery flush will resend
        seq = self._unacked[0]
        seg = self._segments[seq]
        self._retransmit_segment(seg)
        self._rto_backoff = min(self._rto_backoff * 2, 64)
        self._arm_rto()

    def _retransmit_segment(self, seg: _Segment) -> None:
        now = self.engine.now()
        if seg.live_txn is not None:
            old = self._txns.pop(seg.live_txn, None)
            if old is not None:
                self.cca.on_loss_detected(old.bytes)
        seg.retransmits += 1
        self.retransmissions += 1
        txn = self._next_txn(seg.packet.seq, seg.packet.size_bytes, True, True)
        seg.live_txn = txn.txn_id
        frame = DataFrame(Channel.RELIABLE_STREAM, seg.packet, txn.txn_id,
                          encode_header(Channel.RELIABLE_STREAM, seg.packet.cls,
                                        seg.packet.seq, seg.packet.tx_time,
                                        seg.packet.size_bytes),
                          is_retransmit=True)
        self.link.send(frame, frame.wire_bytes, now)
        self.cca.note_sent(seg.packet.size_bytes)

    def _schedule_sweep(self) -> None:
        self._sweep_ticket = self.engine.call_at(
            self.engine.now() + self.DGRAM_SWEEP_US, self._on_sweep,
            EventKind.TIMER, target="transport.sweep",
        )

    def _on_sweep(self) -> None:
        now = self.engine.now()
        srtt = self.cca.srtt_us or float(self.RTO_FLOOR_US)
        horizon = max(2.0 * srtt, 250_000.0)
        while self._dgram_order:
            txn = self._txns.get(self._dgram_order[0])
            if txn is None:
                self._dgram_order.popleft()
                continue
            if now - txn.sent_at <= horizon:
                break
            self._dgram_order.popleft()
            self._txns.pop(txn.txn_id, None)
            if txn.controlled:
                self.cca.on_loss_detected(txn.bytes)
        self._schedule_sweep()
        self.pump()

    # -- handover recovery ------------------------------------------------------------

    def begin_handover(self, start_us: SimTime, t_phy_us: SimTime,
                       mode: Optional[ResumptionMode] = None) -> HandoverRecord:
        """Schedule a radio blackout and the recovery that follows it."""
        requested = mode or self.resumption_mode
        effective = requested
        fell_back = False
        if requested is ResumptionMode.ZERO_RTT and not self.session_ticket:
            effective = ResumptionMode.FULL
            fell_back = True
        rtts = (self.handshake_rtts_override
                if self.handshake_rtts_override is not None and mode is None
                else DEFAULT_HANDSHAKE_RTTS[effective])
        rec = HandoverRecord(start_us, t_phy_us, requested, effective, rtts,
                             fell_back)
        self.handover_records.append(rec)
        self._pending_handovers.append(rec)
        self.link.inject_handover(start_us, t_phy_us)
        return rec

    def _on_blackout(self, active: bool) -> None:
        if active:
            self.phase = Phase.BLACKOUT
            if self._pending_handovers:
                self._active_handover = self._pending_handovers.popleft()
                self._active_handover.last_delivery_before_us = self.last_delivery_probe()
            if self._rto_ticket is not None:
                self.engine.cancel(self._rto_ticket)
                self._rto_ticket = None
            # everything in flight died with the radio
            for txn_id in list(self._dgram_order):
                txn = self._txns.pop(txn_id, None)
                if txn is not None and txn.controlled:
                    self.cca.on_loss_detected(txn.bytes)
            self._dgram_order.clear()
            for seq in self._unacked:
                seg = self._segments[seq]
                if seg.live_txn is not None:
                    old = self._txns.pop(seg.live_txn, None)
                    if old is not None:
                        self.cca.on_loss_detected(old.bytes)
                    seg.live_txn = None
        else:
            self._start_recovery()

    def _start_recovery(self) -> None:
        rec = self._active_handover
        rtts = rec.handshake_rtts if rec is not None else \
            DEFAULT_HANDSHAKE_RTTS[self.resumption_mode]
        self._recovery_marker += 1
        self._handshake_rounds_left = rtts
        if rtts > 0:
            self.phase = Phase.HANDSHAKING
            self._send_ctrl("handshake", 1)
        else:
            self.phase = Phase.RESUMING
            self._send_ctrl("validate", 0)

    def _send_ctrl(self, kind: str, round_index: int) -> None:
        now = self.engine.now()
        frame = CtrlFrame(kind, round_index, now)
        self._expected_ctrl = (kind, round_index)
        self.link.send(frame, frame.wire_bytes, now)
        if self._ctrl_ticket is not None:
            self.engine.cancel(self._ctrl_ticket)
        self._ctrl_ticket = self.engine.call_at(
            now + max(round(2 * (self.cca.srtt_us or 50_000)), self.CTRL_RETRY_US),
            lambda: self._retry_ctrl(kind, round_index),
            EventKind.TIMER, target="transport.ctrl",
        )

    def _retry_ctrl(self, kind: str, round_index: int) -> None:
        if self._expected_ctrl == (kind, round_index) and \
                self.phase in (Phase.HANDSHAKING, Phase.RESUMING):
            self._send_ctrl(kind, round_index)

    def on_ctrl_reply(self, frame: CtrlFrame) -> None:
        if self._expected_ctrl != (frame.kind, frame.round_index):
            return
        self._expected_ctrl = None
        if self._ctrl_ticket is not None:
            self.engine.cancel(self._ctrl_ticket)
            self._ctrl_ticket = None
        if frame.kind == "handshake":
            self._handshake_rounds_left -= 1
            if self._handshake_rounds_left > 0:
                self._send_ctrl("handshake", frame.round_index + 1)
            else:
                self.phase = Phase.RESUMING
                self._send_ctrl("validate", 0)
        elif frame.kind == "validate":
            self._finish_recovery()

    def _finish_recovery(self) -> None:
        self.phase = Phase.ESTABLISHED
        self._rto_backoff = 1
        for seq in list(self._unacked):
            seg = self._segments[seq]
            if not seg.acked:
                self._retransmit_segment(seg)
        self._arm_rto()
        self.pump()

    # -- audits ------------------------------------------------------------------

    def stream_fully_acked(self) -> bool:
        return not self._unacked

    def bytes_in_flight(self) -> int:
        return self.cca.bytes_in_flight


class TransportReceiver:
    """Receiver-side endpoint: reorder/dedup, feedback, replay defense."""

    def __init__(
        self,
        engine: Engine,
        sender: UnifiedTransport,
        reverse_delay_us: SimTime,
        app_sink: Callable[[Packet, SimTime], None],
        freshness_horizon_us: SimTime = 3_000_000,
    ) -> None:
        self.engine = engine
        self.sender = sender
        self.reverse_delay_us = reverse_delay_us
        self.app_sink = app_sink
        self.replay_guard = ReplayGuard(freshness_horizon_us)
        self.expected_stream_seq = 0
        self._reorder: Dict[int, Packet] = {}
        self.stream_duplicates = 0
        self.dgrams_received = 0

    # packets arriving from the link ------------------------------------------------

    def on_frame(self, item: object, now: SimTime) -> None:
        if isinstance(item, CtrlFrame):
            self._feedback(lambda: self.sender.on_ctrl_reply(item))
            return
        assert isinstance(item, DataFrame)
        fields = decode_header(item.header)
        if fields.channel is Channel.RELIABLE_STREAM:
            self._on_stream_segment(item, fields, now)
        else:
            self._on_datagram(item, fields, now)

    def _on_stream_segment(self, frame: DataFrame, fields: HeaderFields,
                           now: SimTime) -> None:
        seq = fields.seq
        if seq < self.expected_stream_seq or seq in self._reorder:
            self.stream_duplicates += 1
        else:
            self._reorder[seq] = frame.packet
            while self.expected_stream_seq in self._reorder:
                pkt = self._reorder.pop(self.expected_stream_seq)
                self.expected_stream_seq += 1
                self.deliver_to_app(pkt, now)
        ack = StreamAck(self.expected_stream_seq - 1, seq, frame.txn_id, now)
        self._feedback(lambda: self.sender.on_stream_ack(ack))

    def _on_datagram(self, frame: DataFrame, fields: HeaderFields,
                     now: SimTime) -> None:
        self.dgrams_received += 1
        pkt = frame.packet
        if pkt.cls is PacketClass.C2:
            self.deliver_to_app(pkt, now)
        else:
            self.app_sink(pkt, now)
        fb = DgramFeedback(frame.txn_id, now)
        self._feedback(lambda: self.sender.on_dgram_feedback(fb))

    def deliver_to_app(self, pkt: Packet, now: SimTime) -> None:
        """Final hop into the command sink, protected by the replay guard."""
        if pkt.cls is PacketClass.C2:
            verdict = self.replay_guard.check(pkt.seq, pkt.tx_time, now)
            if verdict is not ReplayResult.ACCEPT:
                return
        self.app_sink(pkt, now)

    def reset_for_resumption(self) -> None:
        """Model a resumed connection whose transport-level receive state was
        lost; only the application replay guard remains."""
        self.expected_stream_seq = 0
        self._reorder.clear()

    def _feedback(self, fn: Callable[[], None]) -> None:
        self.engine.call_at(self.engine.now() + self.reverse_delay_us, fn,
                            EventKind.ACK, target="reverse-path")
