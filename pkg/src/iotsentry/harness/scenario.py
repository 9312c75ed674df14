"""Deterministic two-phase scenario runner.

Phase one provisions devices through the request/approve workflow against a
simulated firewall; phase two launches a synthetic attack, lets the ingest
and response pipeline block the offender, and measures the latency
decomposition with an independent connectivity prober. Per-operation delays
are injected as sleeps inside the six instrumented pipeline operations, so
the report reproduces a configured timing profile structurally rather than
chasing wall-clock equality with any particular deployment.
"""

from __future__ import annotations

import logging
import random
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..clock import OperationClock, PIPELINE_OPS, now
from ..domain import Device, DeviceState, Institution, NetworkProfile, Principal, Role
from ..errors import DeviceNotActive, ProbeTimeout, ScenarioFailed
from ..firewall import IOT_ALLOWED, IOT_BLOCKED, SimulatedFirewall
from ..incidents import IncidentEngine
from ..pipeline import ResponsePipeline
from ..registry import DeviceRegistry
from ..severity import DEFAULT_POLICY
from ..storage import Storage
from ..zeekio import NoticeTailer, compose_header, compose_notice_line
from .prober import ConnectivityProber
from .report import LatencyReport, RepetitionResult

logger = logging.getLogger(__name__)

ATTACK_PROFILES = ("sql_injection", "port_scan", "none")

PROFILE_NOTES = {
    "sql_injection": ("HTTP::SQL_Injection_Attacker", "SQL injection payload observed from {src}"),
    "port_scan": ("Scan::Port_Scan", "{src} scanned 32 ports on {dst}"),
}

TARGET_SERVER_IP = "10.99.0.10"
TARGET_SERVER_PORT = 80


@dataclass
class ScenarioConfig:
    device_count: int = 1
    attack_profile: str = "sql_injection"
    op_delays: dict[str, float] = field(default_factory=dict)
    probe_interval: float = 0.5
    repetitions: int = 1
    seed: int = 1
    detection_delay: float = 12.1  # the TtD knob: alert latency of the detector
    notice_count: int = 1
    poll_interval: float = 0.2
    probe_horizon: float = 30.0
    ip_pool: str = "192.168.1.0/24"

    def validate(self) -> None:
        if self.device_count < 1:
            raise ValueError("device_count must be >= 1")
        if self.attack_profile not in ATTACK_PROFILES:
            raise ValueError(f"attack_profile must be one of {ATTACK_PROFILES}")
        if any(d < 0 for d in self.op_delays.values()):
            raise ValueError("operation delays must be >= 0")
        unknown = set(self.op_delays) - set(PIPELINE_OPS)
        if unknown:
            raise ValueError(f"unknown operation delays: {sorted(unknown)}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.probe_interval <= 0:
            raise ValueError("probe_interval must be > 0")
        if self.detection_delay < 0:
            raise ValueError("detection_delay must be >= 0")
        if self.notice_count < 1:
            raise ValueError("notice_count must be >= 1")

    def delay_total(self) -> float:
        return sum(self.op_delays.values())


@dataclass(frozen=True)
class AttackEvent:
    device_id: str
    started_at: float
    profile: str
    emitted_notices: int


def inject_attack(
    device: Device,
    profile: str,
    log_sink: str | Path,
    detection_delay: float = 0.0,
    notice_count: int = 1,
    rng: random.Random | None = None,
) -> AttackEvent:
    """Record the attack start, wait out the detection delay, emit notices.

    The notices land in one write so a mid-write poll cannot split the batch.
    """
    if device.state is not DeviceState.ACTIVE:
        raise DeviceNotActive(f"device {device.device_id} is {device.state.value}")
    if profile not in PROFILE_NOTES:
        raise ValueError(f"profile {profile!r} emits no notices")
    rng = rng or random.Random()
    started_at = now()
    if detection_delay > 0:
        time.sleep(detection_delay)
    note, msg_template = PROFILE_NOTES[profile]
    lines = []
    for _ in range(notice_count):
        lines.append(
            compose_notice_line(
                ts=now(),
                src_ip=device.ip,
                note=note,
                msg=msg_template.format(src=device.ip, dst=TARGET_SERVER_IP),
                uid="C%015x" % rng.getrandbits(60),
                src_port=rng.randrange(1024, 65535),
                dst_ip=TARGET_SERVER_IP,
                dst_port=TARGET_SERVER_PORT,
            )
        )
    with open(log_sink, "a", encoding="utf-8") as fh:
        fh.write("".join(lines))
        fh.flush()
    return AttackEvent(device.device_id, started_at, profile, notice_count)


class _RepetitionWorld:
    """One isolated provision-and-respond environment."""

    INSTITUTION = "inst-1"

    def __init__(self, config: ScenarioConfig, rep_index: int, workdir: Path):
        self.config = config
        self.rng = random.Random((config.seed << 16) + rep_index)
        self.events: list[tuple[str, str]] = []
        self.clock = OperationClock(config.op_delays, enabled=False)
        self.storage = Storage()
        self.fw = SimulatedFirewall()
        institution = Institution(
            self.INSTITUTION,
            name="Campus",
            network_profile=NetworkProfile(endpoint="sim://local", ip_pool=config.ip_pool),
        )
        self.registry = DeviceRegistry(
            self.storage, {self.INSTITUTION: institution}, {self.INSTITUTION: self.fw}, ops=self.clock
        )
        self.engine = IncidentEngine(
            self.storage,
            policy=DEFAULT_POLICY,
            lease_source=self.registry.lease_snapshot,
            device_source=self.registry.device,
            ops=self.clock,
        )
        self.pipeline = ResponsePipeline(
            self.engine, self.registry, ops=self.clock, on_event=self._on_pipeline_event,
            idle_wait=min(0.05, config.poll_interval),
        )
        self.log_path = workdir / "notice.log"
        self.log_path.write_text(compose_header())
        self.tailer = NoticeTailer(str(self.log_path), poll_interval=config.poll_interval)
        self.admin = Principal("admin", Role.ADMIN, frozenset({self.INSTITUTION}))
        self.devices: list[Device] = []
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def _on_pipeline_event(self, kind: str, payload: dict) -> None:
        label = payload.get("mac") or payload.get("note") or str(payload.get("size", ""))
        self.events.append((kind, label))

    def _mac(self) -> str:
        tail = ":".join(f"{self.rng.randrange(256):02x}" for _ in range(5))
        return f"02:{tail}"

    def provision(self) -> None:
        for i in range(self.config.device_count):
            owner = Principal(f"user-{i}", Role.REGULAR, frozenset({self.INSTITUTION}))
            device = self.registry.request_access(owner, self._mac(), f"device-{i}")
            device = self.registry.approve_device(self.admin, device.device_id)
            self.devices.append(device)
            self.events.append(("provisioned", device.mac))

    def start(self) -> None:
        worker = threading.Thread(target=self.pipeline.run, args=(self._stop,), name="responder", daemon=True)
        pump = threading.Thread(target=self.pipeline.pump, args=(self.tailer, self._stop), name="tailer", daemon=True)
        worker.start()
        pump.start()
        self._threads = [worker, pump]

    def shutdown(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=10)
        self.storage.close()

    def end_states(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for device in self.registry.devices(self.INSTITUTION):
            counts[device.state.value] = counts.get(device.state.value, 0) + 1
        return counts


def _wait_for_block(world: _RepetitionWorld, device_id: str, timeout: float) -> Device:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        device = world.registry.device(device_id)
        if device is not None and device.state is DeviceState.BLOCKED:
            return device
        time.sleep(0.005)
    raise ScenarioFailed("device never reached Blocked", phase="response")


def _run_repetition(config: ScenarioConfig, rep_index: int, workdir: Path) -> tuple[RepetitionResult, list]:
    world = _RepetitionWorld(config, rep_index, workdir)
    phase = "provision"
    try:
        world.provision()
        world.start()
        target = world.devices[0]

        if config.attack_profile == "none":
            time.sleep(max(3 * config.poll_interval, 0.2))
            result = RepetitionResult(
                index=rep_index, blocked=False, device_mac=target.mac, end_states=world.end_states()
            )
            return result, world.events

        prober = None
        if config.attack_profile == "sql_injection":
            prober = ConnectivityProber(
                verdict=lambda: world.fw.evaluate_packet(target.ip, TARGET_SERVER_IP),
                interval=config.probe_interval,
                horizon=config.detection_delay + config.delay_total() + config.probe_horizon,
            ).start()

        phase = "attack"
        world.clock.arm()
        world.events.append(("attack_started", target.mac))
        attack = inject_attack(
            target,
            config.attack_profile,
            world.log_path,
            detection_delay=config.detection_delay,
            notice_count=config.notice_count,
            rng=world.rng,
        )

        if config.attack_profile == "port_scan":
            # Recorded but below the actuation threshold: no block expected.
            time.sleep(max(3 * config.poll_interval, 0.2))
            result = RepetitionResult(
                index=rep_index, blocked=False, device_mac=target.mac, end_states=world.end_states()
            )
            return result, world.events

        phase = "response"
        response_budget = config.delay_total() + 4 * config.poll_interval + 10.0
        _wait_for_block(world, target.device_id, response_budget)

        phase = "probe"
        rows = world.storage.query("blocking_feedback_history", {"device_id": target.device_id})
        committed = [r for r in rows if r.t_commit is not None]
        if not committed:
            raise ScenarioFailed("no committed feedback row", phase="probe")
        feedback = committed[-1]
        feedback = world.storage.complete_blocking_feedback(
            feedback.feedback_id, "t_attack_start", attack.started_at
        )
        loss_at = prober.result(wait=True)
        feedback = world.storage.complete_blocking_feedback(feedback.feedback_id, "t_loss_of_access", loss_at)
        world.events.append(("loss_observed", target.mac))

        phase = "finalize"
        committed_state = world.fw.get_state(committed=True)
        op_timings = dict(world.clock.drain_timings())
        result = RepetitionResult(
            index=rep_index,
            blocked=True,
            device_mac=target.mac,
            ttd_seconds=feedback.t_notice - feedback.t_attack_start,
            processing_seconds=feedback.t_decision - feedback.t_notice,
            ttb_seconds=feedback.t_commit - feedback.t_decision,
            loss_seconds=feedback.t_loss_of_access - feedback.t_commit,
            total_seconds=feedback.t_loss_of_access - feedback.t_attack_start,
            op_timings=op_timings,
            ip_in_allowed=target.ip in committed_state.aliases[IOT_ALLOWED].addresses,
            ip_in_blocked=target.ip in committed_state.aliases[IOT_BLOCKED].addresses,
            feedback_complete=all(
                getattr(feedback, name) is not None
                for name in ("t_attack_start", "t_notice", "t_decision", "t_commit", "t_loss_of_access")
            ),
            end_states=world.end_states(),
        )
        return result, world.events
    except ProbeTimeout as exc:
        raise ScenarioFailed(exc.message, phase="probe") from exc
    except ScenarioFailed:
        raise
    except Exception as exc:
        raise ScenarioFailed(str(exc), phase=phase) from exc
    finally:
        world.shutdown()


def run_scenario(config: ScenarioConfig) -> LatencyReport:
    """Run the configured scenario and aggregate a latency report."""
    config.validate()
    report = LatencyReport(profile=config.attack_profile, seed=config.seed)
    for rep_index in range(config.repetitions):
        with tempfile.TemporaryDirectory(prefix="iotsentry-scenario-") as tmp:
            try:
                result, events = _run_repetition(config, rep_index, Path(tmp))
            except ScenarioFailed as exc:
                exc.partial_report = report
                raise
            report.repetitions.append(result)
            report.events.extend(events)
    return report
