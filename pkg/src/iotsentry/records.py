"""Persisted record types shared by the registry, incident engine, and stores."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .clock import now
from .errors import AmbiguousLease
from .severity import Severity


class IncidentStatus(str, Enum):
    NEW = "New"
    VALIDATED = "Validated"
    ACTIONED = "Actioned"
    DISMISSED = "Dismissed"


#: Legal incident status moves; anything else is a SchemaViolation on write.
INCIDENT_STATUS_FLOW = {
    IncidentStatus.NEW: {IncidentStatus.VALIDATED, IncidentStatus.DISMISSED},
    IncidentStatus.VALIDATED: {IncidentStatus.ACTIONED},
    IncidentStatus.ACTIONED: set(),
    IncidentStatus.DISMISSED: set(),
}


@dataclass(frozen=True)
class AccessRequest:
    request_id: str
    requester: str
    mac: str
    device_name: str
    institution_id: str
    requested_ip: Optional[str] = None
    submitted_at: float = field(default_factory=now)


@dataclass(frozen=True)
class LeaseRecord:
    lease_id: str
    device_id: str
    ip: str
    start: float
    end: Optional[float] = None  # None = open lease

    def contains(self, ts: float) -> bool:
        if ts < self.start:
            return False
        return self.end is None or ts < self.end


@dataclass(frozen=True)
class IncidentRecord:
    incident_id: str
    ts: float
    src_ip: str
    note: str
    severity: Severity
    msg: str = ""
    uid: Optional[str] = None
    dst_ip: Optional[str] = None
    device_id: Optional[str] = None
    institution_id: Optional[str] = None
    status: IncidentStatus = IncidentStatus.NEW
    created_at: float = field(default_factory=now)


@dataclass(frozen=True)
class BlockingFeedback:
    """Timing ledger row for one block: decision, commit, and observed loss."""

    feedback_id: str
    device_id: str
    t_notice: float
    t_decision: float
    incident_id: Optional[str] = None
    t_attack_start: Optional[float] = None
    t_commit: Optional[float] = None
    t_loss_of_access: Optional[float] = None
    unblocked_at: Optional[float] = None


@dataclass(frozen=True)
class AuditEntry:
    entry_id: str
    ts: float
    origin: str  # "api" | "domain" | "system"
    actor: str
    action: str
    subject: str
    detail: str = ""


@dataclass(frozen=True)
class LeaseSnapshot:
    """Point-in-time IP -> lease view used for incident correlation.

    Normally at most one lease per IP; corrupt registries (two open leases on
    one IP) are representable so correlation can surface AmbiguousLease.
    """

    entries: tuple[LeaseRecord, ...]
    taken_at: float

    def lookup(self, ip: str, ts: float) -> Optional[str]:
        """Device holding ``ip`` at ``ts``, or None; AmbiguousLease on overlap."""
        matches = [lease for lease in self.entries if lease.ip == ip and lease.contains(ts)]
        if len(matches) > 1:
            raise AmbiguousLease(f"{len(matches)} leases claim {ip} at {ts:.6f}")
        return matches[0].device_id if matches else None

    def device_ids(self) -> set[str]:
        return {lease.device_id for lease in self.entries}
