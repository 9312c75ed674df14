"""Incident classification, correlation, persistence, and response decisions.

The engine consumes parsed notices, classifies them against the severity
policy, correlates source IPs to registered devices through lease intervals,
persists rows in the ``zeek_incidents`` store, and decides the automatic
response. Only critical incidents on currently active devices actuate.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .clock import NULL_CLOCK, OperationClock, now
from .domain import Device, DeviceState
from .errors import AmbiguousLease
from .records import IncidentRecord, IncidentStatus, LeaseSnapshot
from .severity import DEFAULT_POLICY, Severity, SeverityPolicy
from .storage import Storage
from .zeekio import ZeekNotice

logger = logging.getLogger(__name__)

ACTION_NONE = "none"
ACTION_BLOCK = "block"


@dataclass(frozen=True)
class ResponseAction:
    kind: str
    reason: str
    device_id: Optional[str] = None

    def __post_init__(self):
        if self.kind == ACTION_BLOCK and not self.device_id:
            raise ValueError("block actions need a device")


@dataclass(frozen=True)
class QuarantinedNotice:
    notice: ZeekNotice
    reason: str


def classify_severity(notice: ZeekNotice, policy: SeverityPolicy) -> Severity:
    return policy.classify(notice.note)


def correlate(notice: ZeekNotice, leases: LeaseSnapshot) -> Optional[str]:
    """Device holding the notice's source IP when it fired, if any."""
    return leases.lookup(notice.src_ip, notice.ts)


def decide_response(incident: IncidentRecord, device: Device | None) -> ResponseAction:
    """Pure response decision given the incident and a device snapshot."""
    if incident.severity < Severity.CRITICAL:
        return ResponseAction(ACTION_NONE, f"severity {incident.severity.label} below critical")
    if incident.device_id is None:
        return ResponseAction(ACTION_NONE, "no correlated device")
    if device is None:
        return ResponseAction(ACTION_NONE, f"device {incident.device_id} unknown to registry")
    if device.state is not DeviceState.ACTIVE:
        return ResponseAction(ACTION_NONE, f"device is {device.state.value}, not Active")
    return ResponseAction(ACTION_BLOCK, "critical incident on active device", device_id=incident.device_id)


class IncidentEngine:
    """Single-worker incident processor backed by the persistence stores."""

    def __init__(
        self,
        storage: Storage,
        policy: SeverityPolicy = DEFAULT_POLICY,
        lease_source: Callable[[], LeaseSnapshot] | None = None,
        device_source: Callable[[str], Device | None] | None = None,
        ops: OperationClock | None = None,
    ):
        self.storage = storage
        self.policy = policy
        self.lease_source = lease_source or (lambda: LeaseSnapshot(entries=(), taken_at=now()))
        self.device_source = device_source or (lambda device_id: None)
        self.ops = ops or NULL_CLOCK
        self.quarantine: list[QuarantinedNotice] = []
        # Idempotency index over (uid, ts, note); rebuilt from the store so a
        # replayed stream after restart still deduplicates.
        self._seen: dict[tuple, str] = {}
        for record in storage.query("zeek_incidents"):
            self._seen[(record.uid, record.ts, record.note)] = record.incident_id

    # -- persistence -----------------------------------------------------------

    def save_incident(
        self, notice: ZeekNotice, severity: Severity, device: Device | None
    ) -> IncidentRecord:
        """Persist one incident row; replaying the same notice is a no-op."""
        key = (notice.uid, notice.ts, notice.note)
        existing_id = self._seen.get(key)
        if existing_id is not None:
            existing = self.storage.get("zeek_incidents", existing_id)
            if existing is not None:
                return existing
        record = IncidentRecord(
            incident_id=self.storage.new_id(),
            ts=notice.ts,
            src_ip=notice.src_ip,
            note=notice.note,
            severity=severity,
            msg=notice.msg,
            uid=notice.uid,
            dst_ip=notice.dst_ip,
            device_id=device.device_id if device else None,
            institution_id=device.institution_id if device else None,
            status=IncidentStatus.NEW,
            created_at=now(),
        )
        self.storage.put("zeek_incidents", record)
        self._seen[key] = record.incident_id
        return record

    def _set_status(self, record: IncidentRecord, status: IncidentStatus) -> IncidentRecord:
        updated = dataclasses.replace(record, status=status)
        self.storage.put("zeek_incidents", updated)
        return updated

    # -- the pipeline --------------------------------------------------------------

    def process_incidents(
        self, batch: Sequence[ZeekNotice]
    ) -> list[tuple[IncidentRecord, ResponseAction]]:
        """Classify, correlate, persist, and decide for a batch in stream order.

        Block actions are deduplicated per device within the batch: the first
        critical incident wins, later ones persist as Validated with no
        action. Ambiguous leases quarantine the notice and processing
        continues; a storage outage propagates after the already-persisted
        prefix.
        """
        if not batch:
            return []
        leases = self.lease_source()

        saved: list[IncidentRecord] = []
        with self.ops.track("save_incident"):
            for notice in batch:
                severity = classify_severity(notice, self.policy)
                try:
                    device_id = correlate(notice, leases)
                except AmbiguousLease as exc:
                    logger.warning("quarantining notice: %s", exc.message)
                    self.quarantine.append(QuarantinedNotice(notice, exc.message))
                    continue
                device = self.device_source(device_id) if device_id else None
                saved.append(self.save_incident(notice, severity, device))

        results: list[tuple[IncidentRecord, ResponseAction]] = []
        with self.ops.track("process_incidents"):
            blocking: set[str] = set()
            for record in saved:
                device = self.device_source(record.device_id) if record.device_id else None
                action = decide_response(record, device)
                if action.kind == ACTION_BLOCK:
                    if action.device_id in blocking:
                        action = ResponseAction(ACTION_NONE, "already blocking")
                        if record.status is IncidentStatus.NEW:
                            record = self._set_status(record, IncidentStatus.VALIDATED)
                    else:
                        blocking.add(action.device_id)
                        if record.status is IncidentStatus.NEW:
                            record = self._set_status(record, IncidentStatus.VALIDATED)
                        if record.status is IncidentStatus.VALIDATED:
                            record = self._set_status(record, IncidentStatus.ACTIONED)
                results.append((record, action))
        return results
