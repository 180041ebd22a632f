"""uavlink: deterministic emulation of a unified UAV transport stack.

One congestion context carries a reliable command stream and unreliable
video datagrams; a strict-priority scheduler with ingress AQM keeps command
latency independent of video load; a delay-driven controller with telemetry
headroom throttles the encoder before the command channel starves; and
handover recovery is modeled down to the radio blackout plus handshake
round trips.
"""
from .config import ConfigError, ScenarioConfig, parse_scenario_file, parse_scenario_text
from .congestion import CcaConfig, Controller, SendDecision, decrease_factor
from .engine import Engine, Event, EventKind, SchedulingError, SimTime
from .link import (CapacitySchedule, LinkModel, LinkTrace, RateStep, TraceError,
                   load_trace)
from .metrics import (MetricsCollector, OracleResult, QueueOracleParams,
                      eq1_prediction, mm_priority_oracle, priority_wait_prediction)
from .scheduler import (Channel, Packet, PacketClass, PriorityScheduler,
                        SchedulerMode)
from .sim import RunResult, Simulation, compare_scenario, run_scenario
from .traffic import C2Source, PoissonPacketSource, VideoSource
from .transport import (HandoverRecord, ReplayGuard, ReplayResult, ResumptionMode,
                        TransportReceiver, UnifiedTransport, WIRE_HEADER_BYTES,
                        decode_header, encode_header)

__version__ = "0.1.0"
