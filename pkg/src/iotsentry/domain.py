"""Core entities: device lifecycle state machine and role-based authorization.

Devices are immutable values; the only way a device changes state is
:func:`transition_device`, which enforces both the legal-transition table and
actor rights. The registry serializes mutation per device, so these types are
safe to share read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from .clock import now
from .errors import IllegalTransition, Unauthorized


class DeviceState(str, Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    ACTIVE = "Active"
    BLOCKED = "Blocked"
    REVOKED = "Revoked"


class Role(str, Enum):
    REGULAR = "Regular"
    ADMIN = "Admin"
    SUPERUSER = "Superuser"
    SYSTEM = "System"  # internal responder principal, block-only


LIFECYCLE_EVENTS = ("approve", "activate", "block", "unblock", "revoke")

# Legal transitions keyed by (state, event). "revoke" is legal from any state
# and handled separately.
LEGAL_TRANSITIONS: dict[tuple[DeviceState, str], DeviceState] = {
    (DeviceState.PENDING, "approve"): DeviceState.APPROVED,
    (DeviceState.APPROVED, "activate"): DeviceState.ACTIVE,
    (DeviceState.ACTIVE, "block"): DeviceState.BLOCKED,
    (DeviceState.BLOCKED, "unblock"): DeviceState.ACTIVE,
}

AUTHORIZE_ACTIONS = (
    "read_device",
    "write_device",
    "approve",
    "block",
    "unblock",
    "read_incidents",
    "manage_institutions",
    "manage_firewall",
)


def ms(t: float) -> float:
    """Quantize a timestamp to millisecond resolution."""
    return round(t, 3)


@dataclass(frozen=True)
class Principal:
    """An authenticated actor: a user with a role scoped to institutions."""

    subject: str
    role: Role
    institutions: frozenset[str]

    def __post_init__(self):
        if self.role in (Role.REGULAR, Role.ADMIN) and len(self.institutions) != 1:
            raise ValueError(f"{self.role.value} principals are scoped to exactly one institution")
        if self.role is Role.SUPERUSER and not self.institutions:
            raise ValueError("Superuser principals need at least one institution")

    @property
    def institution(self) -> str:
        return next(iter(self.institutions))


#: The automatic-response principal: may block, nothing else.
SYSTEM_RESPONDER = Principal(subject="system-responder", role=Role.SYSTEM, institutions=frozenset())


@dataclass(frozen=True)
class Device:
    device_id: str
    mac: str  # canonical lowercase colon-separated
    owner_id: str
    institution_id: str
    state: DeviceState = DeviceState.PENDING
    ip: Optional[str] = None
    name: str = ""
    pending_op: Optional[str] = None  # retriable firewall op: "registration" | "block"
    approved_by: str = ""
    created_at: float = field(default_factory=lambda: ms(now()))
    updated_at: float = field(default_factory=lambda: ms(now()))


@dataclass(frozen=True)
class NetworkProfile:
    """Where and how an institution's firewall is driven."""

    endpoint: str
    credential_ref: str = ""
    interface: str = "lan"
    ip_pool: str = ""  # CIDR the registry may auto-assign from

    def __post_init__(self):
        if not self.endpoint:
            raise ValueError("network profile endpoint must be non-empty")


@dataclass(frozen=True)
class Institution:
    institution_id: str
    name: str
    network_profile: NetworkProfile


@dataclass(frozen=True)
class ResourceRef:
    """Target descriptor for authorization decisions."""

    kind: str  # "device" | "incident" | "institution" | "firewall"
    institution_id: Optional[str] = None
    owner_id: Optional[str] = None


def authorize(actor: Principal, action: str, target: ResourceRef) -> bool:
    """Pure allow/deny predicate; deny is a value, never an exception."""
    if action not in AUTHORIZE_ACTIONS:
        return False
    if actor.role is Role.SYSTEM:
        return action == "block"
    if action == "manage_institutions":
        return actor.role is Role.SUPERUSER and target.institution_id in actor.institutions
    if actor.role is Role.SUPERUSER:
        # Uncorrelated resources (no institution) fall to the cross-institution
        # triage role rather than any single-institution admin.
        return target.institution_id is None or target.institution_id in actor.institutions
    if actor.role is Role.ADMIN:
        return target.institution_id is not None and target.institution_id in actor.institutions
    # Regular: own devices only.
    if action in ("read_device", "write_device"):
        return (
            target.kind == "device"
            and target.owner_id == actor.subject
            and target.institution_id in actor.institutions
        )
    return False


def event_authorized(actor: Principal, event: str, device: Device) -> bool:
    """Whether the actor may drive this lifecycle event on this device.

    Every event is an admin-scope action except that the system responder
    holds block rights for the automatic response path.
    """
    if actor.role is Role.SYSTEM:
        return event == "block"
    if actor.role is Role.REGULAR:
        return False
    return device.institution_id in actor.institutions


AuditSink = Callable[[dict], None]


def transition_device(
    device: Device,
    event: str,
    actor: Principal,
    audit: AuditSink | None = None,
    at: float | None = None,
) -> Device:
    """Apply one lifecycle event and return the updated device.

    Raises Unauthorized before IllegalTransition; both leave the device
    untouched. Activation and blocking require an assigned IP (the network
    plane cannot enforce anything about an addressless device).
    """
    if not event_authorized(actor, event, device):
        raise Unauthorized(
            f"{actor.role.value} actor {actor.subject!r} may not {event} device {device.device_id}"
        )
    if event == "revoke":
        target = DeviceState.REVOKED
    else:
        target = LEGAL_TRANSITIONS.get((device.state, event))
        if target is None:
            raise IllegalTransition(f"{event} is not legal from {device.state.value}")
    if target in (DeviceState.ACTIVE, DeviceState.BLOCKED) and device.ip is None:
        raise IllegalTransition(f"cannot enter {target.value} without an assigned IP")
    stamp = ms(at if at is not None else now())
    updated = replace(device, state=target, updated_at=stamp)
    if audit is not None:
        audit(
            {
                "origin": "domain",
                "action": event,
                "actor": actor.subject,
                "subject": device.device_id,
                "detail": f"{device.state.value} -> {target.value}",
                "ts": stamp,
            }
        )
    return updated
