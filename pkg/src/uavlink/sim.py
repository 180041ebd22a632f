"""Scenario runner: wires sources, scheduler, congestion control, transport
and link over one event engine, executes deterministically, and emits a
structured run report plus flat CSV time series.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .config import ScenarioConfig
from .congestion import CcaConfig, Controller
from .engine import Engine, EventKind, SimTime, US_PER_MS, US_PER_SEC
from .link import LinkModel, load_trace
from .metrics import MetricsCollector, QueueOracleParams, eq1_prediction
from .scheduler import PacketClass, PriorityScheduler, SchedulerMode
from .traffic import C2Source, PoissonPacketSource, VideoSource
from .transport import (Channel, ResumptionMode, TransportReceiver,
                        UnifiedTransport, WIRE_HEADER_BYTES)

SCHEMA_VERSION = 1
TICK_US = 100_000          # telemetry / feedback cadence
DRAIN_GRACE_US = 10 * US_PER_SEC


class InvariantViolation(RuntimeError):
    pass


@dataclass
class RunResult:
    report: dict
    series: List[Tuple[float, float, str]]   # (t_ms, value, series_id)

    def report_json(self) -> str:
        return json.dumps(self.report, sort_keys=True, indent=2) + "\n"

    def series_csv(self) -> str:
        lines = ["t_ms,value,series_id"]
        for t_ms, value, sid in self.series:
            lines.append(f"{t_ms:.3f},{value!r},{sid}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str, stem: str = "report") -> Tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / f"{stem}.json"
        series_path = out / f"{stem}_series.csv"
        report_path.write_text(self.report_json(), encoding="utf-8")
        series_path.write_text(self.series_csv(), encoding="utf-8")
        return report_path, series_path


class Simulation:
    def __init__(self, cfg: ScenarioConfig, scenario_name: str = "custom") -> None:
        cfg.validate()
        self.cfg = cfg
        self.scenario_name = scenario_name
        self.engine = Engine()
        self.metrics = MetricsCollector()
        self.duration_us = round(cfg.duration_s * US_PER_SEC)

        link_rng = random.Random(f"{cfg.seed}:link")
        traffic_rng = random.Random(f"{cfg.seed}:traffic")

        if cfg.link_trace_path:
            with open(cfg.link_trace_path, "r", encoding="utf-8") as f:
                capacity = load_trace(f, cfg.link_mtu_bytes)
        else:
            capacity = cfg.rate_schedule()
        self.link = LinkModel(
            self.engine, capacity,
            one_way_delay_us=round(cfg.link_delay_ms * US_PER_MS),
            loss_rate=cfg.link_loss,
            queue_capacity_bytes=cfg.queue_bytes(),
            mtu_bytes=cfg.link_mtu_bytes,
            rng=link_rng,
        )

        self.scheduler = PriorityScheduler(
            cfg.scheduler_mode_enum(),
            q_low_capacity_bytes=cfg.q_low_bytes(),
            stale_age_us=round(cfg.scheduler_stale_ms * US_PER_MS),
            clock=self.engine.now,
        )
        self.scheduler.attach_link(self.link)

        self.cca = Controller(CcaConfig(
            window_us=round(cfg.cca_window_s * US_PER_SEC),
            kappa=cfg.cca_kappa,
            beta=cfg.cca_beta,
            gamma=cfg.cca_gamma,
            d_base_us=round(cfg.cca_d_base_ms * US_PER_MS),
            r_safe_bps=round(cfg.cca_r_safe_kbps * 1000),
            r_min_bps=round(cfg.cca_r_min_kbps * 1000),
            r_max_bps=round(cfg.cca_r_max_kbps * 1000),
            packet_size_bytes=cfg.cca_packet_size,
            initial_window_bytes=cfg.cca_initial_window_bytes,
            credit_cap_bytes=cfg.cca_credit_cap_bytes,
        ))

        self.transport = UnifiedTransport(
            self.engine, self.scheduler, self.cca, self.link,
            max_datagram_size=cfg.transport_max_datagram_size,
            resumption_mode=cfg.resumption_mode(),
            handshake_rtts=(cfg.transport_handshake_rtts
                            if cfg.transport_handshake_rtts >= 0 else None),
            unified=cfg.transport_unified,
            dispatch_gate=cfg.transport_dispatch_gate,
            c2_channel=(Channel.RELIABLE_STREAM
                        if cfg.transport_c2_channel == "stream"
                        else Channel.UNRELIABLE_DATAGRAM),
        )
        self.receiver = TransportReceiver(
            self.engine, self.transport,
            reverse_delay_us=round(cfg.link_delay_ms * US_PER_MS),
            app_sink=self.metrics.record_rx,
            freshness_horizon_us=round(cfg.transport_freshness_s * US_PER_SEC),
        )
        self.link.on_deliver = self.receiver.on_frame
        self.transport.last_delivery_probe = lambda: self.metrics.last_delivery_us

        self.c2_source = C2Source(cfg.c2_rate_hz, cfg.c2_payload_bytes)
        if cfg.video_arrival == "poisson":
            payload = cfg.video_packet_bytes or cfg.transport_max_datagram_size
            self.video_source = PoissonPacketSource(
                cfg.video_poisson_pps, payload, rng=traffic_rng)
        else:
            self.video_source = VideoSource(
                cfg.video_fps, cfg.video_initial_kbps * 1000,
                max_fragment_bytes=cfg.transport_max_datagram_size,
                jitter=cfg.video_jitter, rng=traffic_rng)

        for spec in cfg.handovers():
            self.transport.begin_handover(
                round(spec.start_s * US_PER_SEC),
                round(spec.t_phy_ms * US_PER_MS),
                ResumptionMode(spec.mode) if spec.mode else None,
            )

        self._series: List[Tuple[float, float, str]] = []
        self._c2_residual_samples_us: List[SimTime] = []
        self._eq1_enabled = (cfg.transport_dispatch_gate == "serializer"
                             and cfg.scheduler_mode == "strict"
                             and not cfg.link_trace_path)

        self._schedule_source(self.c2_source)
        self._schedule_source(self.video_source)
        self.engine.call_at(TICK_US, self._tick, EventKind.TIMER, target="sim.tick")

    # -- event plumbing --------------------------------------------------------

    def _schedule_source(self, src) -> None:
        t = src.next_emission_time()
        if t > self.duration_us:
            return
        self.engine.call_at(max(t, self.engine.now()),
                            lambda: self._emit(src),
                            EventKind.PACKET_ARRIVAL, target="traffic")

    def _emit(self, src) -> None:
        now = self.engine.now()
        for p in src.tick(now):
            if p.cls is PacketClass.C2 and self._eq1_enabled:
                self._c2_residual_samples_us.append(
                    self.scheduler.residual_service(now))
            self.transport.on_app_packet(p)
        self._schedule_source(src)

    def _tick(self) -> None:
        now = self.engine.now()
        self.cca.accrue_credit(now)
        rate = self.cca.encoder_rate()
        if rate is not None and isinstance(self.video_source, VideoSource):
            self.video_source.apply_rate(rate)
        snap = self.cca.snapshot(now)
        t_ms = now / 1000.0
        for key, sid in (("cwnd_bytes", "cwnd_bytes"), ("srtt_ms", "srtt_ms"),
                         ("queue_delay_ms", "queue_delay_ms"),
                         ("target_delay_ms", "target_delay_ms"),
                         ("r_tx_bps", "r_tx_bps"), ("r_enc_bps", "r_enc_bps"),
                         ("credits_bytes", "credits_bytes")):
            if snap[key] is not None:
                self._series.append((t_ms, float(snap[key]), sid))
        self.transport.pump()
        if now < self.duration_us:
            self.engine.call_at(now + TICK_US, self._tick,
                                EventKind.TIMER, target="sim.tick")

    # -- execution ----------------------------------------------------------------

    def run(self) -> RunResult:
        self.engine.run_until(self.duration_us)
        self._drain()
        self.link.audit()
        self.metrics.set_expected(PacketClass.C2, self.c2_source.next_seq)
        self.metrics.set_expected(PacketClass.VIDEO,
                                  self.video_source.packets_emitted)
        return self._build_result()

    def _drain(self) -> None:
        deadline = self.duration_us + DRAIN_GRACE_US
        while self.engine.now() < deadline:
            if self.transport.stream_fully_acked() and not self.scheduler.q_high \
                    and self.transport.phase.value == "established":
                break
            nxt = self.engine.peek_next_time()
            if nxt is None:
                break
            step_to = min(deadline, max(nxt, self.engine.now() + TICK_US))
            self.engine.run_until(step_to)

    # -- reporting ----------------------------------------------------------------

    def _build_result(self) -> RunResult:
        cfg = self.cfg
        summary = self.metrics.summary()
        summary["link"] = {**self.link.counters.as_dict(),
                           "still_queued": self.link.still_queued()}
        summary["scheduler"] = self.scheduler.counters.as_dict()
        summary["transport"] = {
            "stream_segments_sent": self.transport.stream_segments_sent,
            "retransmissions": self.transport.retransmissions,
            "dgrams_sent": self.transport.dgrams_sent,
            "replay_duplicates_discarded": self.receiver.replay_guard.duplicates,
            "replay_stale_discarded": self.receiver.replay_guard.stale,
        }
        summary["cca_final"] = self.cca.snapshot(self.engine.now())
        summary["handovers"] = [r.as_dict() for r in self.transport.handover_records]
        if self._eq1_enabled and self._c2_residual_samples_us:
            summary["queue_model"] = self._queue_model_section()

        for row in self.metrics.throughput_series(
                TICK_US, self.duration_us, self.link.capacity_at):
            t_ms, c2_bps, video_bps, cap_bps = row
            self._series.append((t_ms, c2_bps, "thr_c2_bps"))
            self._series.append((t_ms, video_bps, "thr_video_bps"))
            self._series.append((t_ms, cap_bps, "capacity_bps"))
        self._series.sort(key=lambda r: (r[0], r[2]))

        report = {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario_name,
            "config": cfg.resolved_flat(),
            "summary": summary,
        }
        return RunResult(report, self._series)

    def _queue_model_section(self) -> dict:
        cfg = self.cfg
        rate = cfg.initial_rate_bps()
        c2_wire = cfg.c2_payload_bytes + WIRE_HEADER_BYTES
        service_s = c2_wire * 8 / rate
        lambda_vid = (cfg.video_poisson_pps if cfg.video_arrival == "poisson"
                      else cfg.video_fps)
        residual_s = (sum(self._c2_residual_samples_us)
                      / len(self._c2_residual_samples_us) / US_PER_SEC)
        params = QueueOracleParams(cfg.c2_rate_hz, lambda_vid, service_s, residual_s)
        owd_us = round(cfg.link_delay_ms * US_PER_MS)
        lat = [r.latency_us for r in self.metrics.records[PacketClass.C2]]
        measured_sojourn_s = (sum(lat) / len(lat) - owd_us) / US_PER_SEC if lat else None
        section = {
            "rho_c2": params.rho_c2,
            "mean_service_ms": service_s * 1000,
            "empirical_residual_ms": residual_s * 1000,
            "predicted_wait_ms": eq1_prediction(params) * 1000,
            "measured_sojourn_ms": (measured_sojourn_s * 1000
                                    if measured_sojourn_s is not None else None),
            "measured_wait_ms": ((measured_sojourn_s - service_s) * 1000
                                 if measured_sojourn_s is not None else None),
        }
        return section


def run_scenario(cfg: ScenarioConfig, scenario_name: str = "custom") -> RunResult:
    return Simulation(cfg, scenario_name).run()


def compare_scenario(cfg: ScenarioConfig, scenario_name: str = "custom"
                     ) -> Tuple[dict, RunResult, RunResult]:
    """Run the scenario under the full design and under the FIFO/isolated
    baseline with the same seed, and summarize the command-latency ratio."""
    import copy

    cfg_a = copy.deepcopy(cfg)
    cfg_a.scheduler_mode = "strict"
    cfg_a.transport_unified = True
    cfg_b = copy.deepcopy(cfg)
    cfg_b.scheduler_mode = "fifo"
    cfg_b.transport_unified = False

    res_a = run_scenario(cfg_a, f"{scenario_name}[strict+unified]")
    res_b = run_scenario(cfg_b, f"{scenario_name}[fifo+isolated]")

    def c2_mean(res: RunResult) -> Optional[float]:
        lat = res.report["summary"]["c2"]["latency"]
        return lat.get("mean_ms")

    a_mean, b_mean = c2_mean(res_a), c2_mean(res_b)
    paired = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_name,
        "strict_unified": res_a.report["summary"]["c2"],
        "fifo_isolated": res_b.report["summary"]["c2"],
        "c2_latency_ratio": (b_mean / a_mean if a_mean and b_mean else None),
    }
    return paired, res_a, res_b
