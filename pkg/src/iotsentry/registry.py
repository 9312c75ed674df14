"""Device onboarding workflow: the bridge between the lifecycle state machine,
the firewall plane, and lease bookkeeping.

All mutation is serialized per device; firewall edits for one institution
funnel through that institution's writer lock. Firewall outages park the
device with a retriable pending marker instead of losing the intent.
"""

from __future__ import annotations

import dataclasses
import ipaddress
import logging
import threading
from typing import Optional

from .addrs import canonical_mac
from .clock import NULL_CLOCK, OperationClock, now
from .domain import (
    Device,
    DeviceState,
    Institution,
    Principal,
    Role,
    SYSTEM_RESPONDER,
    event_authorized,
    transition_device,
)
from .errors import (
    DeviceNotFound,
    DuplicateMac,
    FirewallUnreachable,
    IllegalTransition,
    IpCollision,
    NoFreeAddress,
    Unauthorized,
)
from .firewall.model import DhcpStaticMapping, IOT_ALLOWED, IOT_BLOCKED, FirewallState, default_state
from .records import AccessRequest, AuditEntry, BlockingFeedback, LeaseRecord, LeaseSnapshot
from .storage import Storage

logger = logging.getLogger(__name__)

PENDING_REGISTRATION = "registration"
PENDING_BLOCK = "block"


@dataclasses.dataclass(frozen=True)
class IncidentContext:
    """Timing context carried from the incident engine into a block."""

    incident_id: Optional[str] = None
    notice_ts: Optional[float] = None
    attack_start: Optional[float] = None
    decided_at: Optional[float] = None


class DeviceRegistry:
    def __init__(
        self,
        storage: Storage,
        institutions: dict[str, Institution],
        firewalls: dict[str, object],
        ops: OperationClock | None = None,
    ):
        self.storage = storage
        self.institutions = dict(institutions)
        self.firewalls = dict(firewalls)
        self.ops = ops or NULL_CLOCK
        self._device_locks: dict[str, threading.RLock] = {}
        self._fw_locks: dict[str, threading.RLock] = {inst: threading.RLock() for inst in firewalls}
        self._registry_lock = threading.RLock()

    # -- lookups -----------------------------------------------------------

    def device(self, device_id: str) -> Device | None:
        return self.storage.get("devices", device_id)

    def require_device(self, device_id: str) -> Device:
        device = self.device(device_id)
        if device is None:
            raise DeviceNotFound(f"no device {device_id}")
        return device

    def devices(self, institution_id: str | None = None, state: DeviceState | None = None) -> list[Device]:
        where = {}
        if institution_id is not None:
            where["institution_id"] = institution_id
        if state is not None:
            where["state"] = state
        return self.storage.query("devices", where or None)

    def device_by_mac(self, institution_id: str, mac: str) -> Device | None:
        for device in self.devices(institution_id=institution_id):
            if device.mac == mac and device.state is not DeviceState.REVOKED:
                return device
        return None

    def pending_operations(self) -> list[tuple[str, str]]:
        return [
            (d.device_id, d.pending_op)
            for d in self.storage.query("devices")
            if d.pending_op is not None
        ]

    def _lock_for(self, device_id: str) -> threading.RLock:
        with self._registry_lock:
            return self._device_locks.setdefault(device_id, threading.RLock())

    def _fw(self, institution_id: str):
        try:
            return self.firewalls[institution_id]
        except KeyError:
            raise DeviceNotFound(f"no firewall bound for institution {institution_id}") from None

    def _fw_lock(self, institution_id: str) -> threading.RLock:
        with self._registry_lock:
            return self._fw_locks.setdefault(institution_id, threading.RLock())

    def _audit(self, entry: dict) -> None:
        self.storage.put(
            "audit_log",
            AuditEntry(
                entry_id=self.storage.new_id(),
                ts=entry.get("ts", now()),
                origin=entry.get("origin", "domain"),
                actor=entry.get("actor", ""),
                action=entry.get("action", ""),
                subject=entry.get("subject", ""),
                detail=entry.get("detail", ""),
            ),
        )

    def _put_device(self, device: Device) -> Device:
        self.storage.put("devices", device)
        return device

    @staticmethod
    def _precheck(device: Device, event: str, actor: Principal) -> None:
        """Fail with the same errors transition_device would, before side effects."""
        if not event_authorized(actor, event, device):
            raise Unauthorized(f"{actor.role.value} actor {actor.subject!r} may not {event} device {device.device_id}")
        if event != "revoke" and (device.state, event) not in {
            (DeviceState.PENDING, "approve"),
            (DeviceState.APPROVED, "activate"),
            (DeviceState.ACTIVE, "block"),
            (DeviceState.BLOCKED, "unblock"),
        }:
            raise IllegalTransition(f"{event} is not legal from {device.state.value}")

    # -- onboarding -------------------------------------------------------------

    def request_access(
        self,
        user: Principal,
        mac: str,
        device_name: str,
        institution_id: str | None = None,
        requested_ip: str | None = None,
    ) -> Device:
        """Register a new device in Pending, awaiting admin approval."""
        mac = canonical_mac(mac)
        institution_id = institution_id or user.institution
        if institution_id not in user.institutions:
            raise Unauthorized(f"{user.subject} is not scoped to institution {institution_id}")
        if institution_id not in self.institutions:
            raise DeviceNotFound(f"unknown institution {institution_id}")
        with self._registry_lock:
            if self.device_by_mac(institution_id, mac) is not None:
                raise DuplicateMac(f"{mac} already registered in {institution_id}")
            device = Device(
                device_id=self.storage.new_id(),
                mac=mac,
                owner_id=user.subject,
                institution_id=institution_id,
                state=DeviceState.PENDING,
                name=device_name,
            )
            request = AccessRequest(
                request_id=self.storage.new_id(),
                requester=user.subject,
                mac=mac,
                device_name=device_name,
                institution_id=institution_id,
                requested_ip=requested_ip,
                submitted_at=device.created_at,
            )
            with self.storage.batch() as batch:
                batch.put("devices", device)
                batch.put("access_requests", request)
        self._audit(
            {"origin": "domain", "action": "request_access", "actor": user.subject, "subject": device.device_id, "ts": device.created_at}
        )
        return device

    # -- IP assignment ---------------------------------------------------------------

    def _used_ips(self, institution_id: str) -> set[str]:
        return {
            d.ip
            for d in self.devices(institution_id=institution_id)
            if d.ip and d.state is not DeviceState.REVOKED
        }

    def _auto_assign_ip(self, institution_id: str) -> str:
        profile = self.institutions[institution_id].network_profile
        if not profile.ip_pool:
            raise NoFreeAddress(f"institution {institution_id} has no IP pool configured")
        used = self._used_ips(institution_id)
        for host in ipaddress.IPv4Network(profile.ip_pool).hosts():
            ip = str(host)
            if ip not in used:
                return ip
        raise NoFreeAddress(f"pool {profile.ip_pool} exhausted")

    def _check_ip_free(self, institution_id: str, ip: str, device_id: str) -> None:
        for d in self.devices(institution_id=institution_id):
            if d.device_id != device_id and d.ip == ip and d.state is not DeviceState.REVOKED:
                raise IpCollision(f"{ip} already assigned to device {d.device_id}")

    # -- approval ----------------------------------------------------------------------

    def approve_device(self, admin: Principal, device_id: str, assigned_ip: str | None = None) -> Device:
        """Approve a pending device and commit its firewall registration.

        On firewall failure the device parks in Approved with a retriable
        registration marker; ``retry_pending`` finishes the job later.
        """
        with self._lock_for(device_id):
            device = self.require_device(device_id)
            self._precheck(device, "approve", admin)
            if assigned_ip is None:
                requests = self.storage.query(
                    "access_requests", {"mac": device.mac, "institution_id": device.institution_id}
                )
                if requests and requests[-1].requested_ip:
                    assigned_ip = requests[-1].requested_ip
            if assigned_ip is None:
                assigned_ip = self._auto_assign_ip(device.institution_id)
            self._check_ip_free(device.institution_id, assigned_ip, device_id)

            device = transition_device(device, "approve", admin, audit=self._audit)
            device = dataclasses.replace(
                device, ip=assigned_ip, pending_op=PENDING_REGISTRATION, approved_by=admin.subject
            )
            self._put_device(device)
            return self._commit_registration(admin, device)

    def _commit_registration(self, actor: Principal, device: Device) -> Device:
        fw = self._fw(device.institution_id)
        try:
            with self._fw_lock(device.institution_id):
                fw.upsert_dhcp_mapping(device.mac, device.ip, hostname=device.name or None)
                fw.add_addresses_to_alias(IOT_ALLOWED, {device.ip})
                receipt = fw.apply_changes()
        except FirewallUnreachable:
            logger.warning("firewall unreachable; device %s parked in Approved", device.device_id)
            raise
        device = transition_device(device, "activate", actor, audit=self._audit, at=receipt.applied_at)
        device = dataclasses.replace(device, pending_op=None)
        lease = LeaseRecord(
            lease_id=self.storage.new_id(),
            device_id=device.device_id,
            ip=device.ip,
            start=receipt.applied_at,
        )
        with self.storage.batch() as batch:
            batch.put("devices", device)
            batch.put("leases", lease)
        return device

    # -- blocking ------------------------------------------------------------------------

    def block_device(
        self,
        actor: Principal,
        device_id: str,
        reason: str = "",
        incident: IncidentContext | None = None,
    ) -> tuple[Device, str]:
        """Swap the device from the allowed to the blocked alias and commit.

        Opens a blocking-feedback row stamped with the decision instant; the
        commit instant lands when the firewall acknowledges. Blocking a
        device that is not Active is an IllegalTransition, never a silent
        no-op, so duplicate response actions stay visible upstream.
        """
        incident = incident or IncidentContext()
        with self._lock_for(device_id):
            device = self.require_device(device_id)
            self._precheck(device, "block", actor)
            decided_at = incident.decided_at if incident.decided_at is not None else now()
            feedback = BlockingFeedback(
                feedback_id=self.storage.new_id(),
                device_id=device.device_id,
                incident_id=incident.incident_id,
                t_notice=incident.notice_ts if incident.notice_ts is not None else decided_at,
                t_decision=decided_at,
                t_attack_start=incident.attack_start,
            )
            self.storage.append_blocking_feedback(feedback)
            device = dataclasses.replace(device, pending_op=PENDING_BLOCK)
            self._put_device(device)
            device = self._commit_block(actor, device, feedback.feedback_id, reason)
            return device, feedback.feedback_id

    def _commit_block(self, actor: Principal, device: Device, feedback_id: str, reason: str) -> Device:
        fw = self._fw(device.institution_id)
        try:
            with self._fw_lock(device.institution_id):
                with self.ops.track("get_alias_by_name"):
                    fw.get_alias_by_name(IOT_ALLOWED)
                with self.ops.track("add_addresses_to_alias"):
                    fw.remove_addresses_from_alias(IOT_ALLOWED, {device.ip})
                    fw.add_addresses_to_alias(IOT_BLOCKED, {device.ip})
                with self.ops.track("apply_changes_firewall"):
                    receipt = fw.apply_changes()
        except FirewallUnreachable:
            logger.warning("firewall unreachable; device %s flagged block-pending", device.device_id)
            raise
        device = transition_device(device, "block", actor, audit=self._audit, at=receipt.applied_at)
        device = dataclasses.replace(device, pending_op=None)
        self._put_device(device)
        self.storage.complete_blocking_feedback(feedback_id, "t_commit", receipt.applied_at)
        if reason:
            self._audit(
                {"origin": "system" if actor.role is Role.SYSTEM else "domain", "action": "block_reason", "actor": actor.subject, "subject": device.device_id, "detail": reason}
            )
        return device

    # -- unblocking ----------------------------------------------------------------------

    def unblock_device(self, admin: Principal, device_id: str) -> Device:
        with self._lock_for(device_id):
            device = self.require_device(device_id)
            self._precheck(device, "unblock", admin)
            fw = self._fw(device.institution_id)
            with self._fw_lock(device.institution_id):
                fw.remove_addresses_from_alias(IOT_BLOCKED, {device.ip})
                fw.add_addresses_to_alias(IOT_ALLOWED, {device.ip})
                receipt = fw.apply_changes()
            device = transition_device(device, "unblock", admin, audit=self._audit, at=receipt.applied_at)
            self._put_device(device)
            feedback = self._open_feedback_for(device_id)
            if feedback is not None:
                self.storage.complete_blocking_feedback(feedback.feedback_id, "unblocked_at", receipt.applied_at)
            return device

    def _open_feedback_for(self, device_id: str) -> BlockingFeedback | None:
        rows = self.storage.query("blocking_feedback_history", {"device_id": device_id})
        open_rows = [r for r in rows if r.unblocked_at is None]
        return open_rows[-1] if open_rows else None

    # -- revocation -----------------------------------------------------------------------

    def revoke_device(self, admin: Principal, device_id: str) -> Device:
        """Remove a device entirely: aliases, mapping, and lease all closed."""
        with self._lock_for(device_id):
            device = self.require_device(device_id)
            self._precheck(device, "revoke", admin)
            if device.ip:
                fw = self._fw(device.institution_id)
                with self._fw_lock(device.institution_id):
                    fw.remove_addresses_from_alias(IOT_ALLOWED, {device.ip})
                    fw.remove_addresses_from_alias(IOT_BLOCKED, {device.ip})
                    fw.delete_dhcp_mapping(device.mac)
                    receipt = fw.apply_changes()
                stamp = receipt.applied_at
            else:
                stamp = now()
            device = transition_device(device, "revoke", admin, audit=self._audit, at=stamp)
            device = dataclasses.replace(device, pending_op=None)
            self._put_device(device)
            self._close_lease(device_id, stamp)
            return device

    def _close_lease(self, device_id: str, end: float) -> None:
        for lease in self.storage.query("leases", {"device_id": device_id}):
            if lease.end is None:
                self.storage.put("leases", dataclasses.replace(lease, end=end))

    # -- retries -------------------------------------------------------------------------------

    def retry_pending(self) -> list[str]:
        """Re-drive parked firewall registrations and blocks; returns completed ids."""
        completed = []
        for device_id, kind in self.pending_operations():
            with self._lock_for(device_id):
                device = self.device(device_id)
                if device is None or device.pending_op is None:
                    continue
                try:
                    if device.pending_op == PENDING_REGISTRATION and device.state is DeviceState.APPROVED:
                        self._commit_registration(self._approver_of(device), device)
                    elif device.pending_op == PENDING_BLOCK and device.state is DeviceState.ACTIVE:
                        feedback = self._latest_uncommitted_feedback(device_id)
                        if feedback is not None:
                            self._commit_block(SYSTEM_RESPONDER, device, feedback.feedback_id, "retry")
                    completed.append(device_id)
                except FirewallUnreachable:
                    continue
        return completed

    @staticmethod
    def _approver_of(device: Device) -> Principal:
        # Retried registrations complete under the identity that approved them.
        return Principal(
            subject=device.approved_by or "admin",
            role=Role.ADMIN,
            institutions=frozenset({device.institution_id}),
        )

    def _latest_uncommitted_feedback(self, device_id: str) -> BlockingFeedback | None:
        rows = self.storage.query("blocking_feedback_history", {"device_id": device_id})
        open_rows = [r for r in rows if r.t_commit is None]
        return open_rows[-1] if open_rows else None

    # -- lease views ----------------------------------------------------------------------------

    def lease_snapshot(self, institution_id: str | None = None, at_time: float | None = None) -> LeaseSnapshot:
        """IP -> lease view of the institutions' leases active at ``at_time``."""
        at = at_time if at_time is not None else now()
        entries = []
        device_inst: dict[str, str] = {d.device_id: d.institution_id for d in self.storage.query("devices")}
        for lease in self.storage.query("leases"):
            if institution_id is not None and device_inst.get(lease.device_id) != institution_id:
                continue
            if lease.contains(at):
                entries.append(lease)
        return LeaseSnapshot(entries=tuple(entries), taken_at=at)

    # -- desired state for reconciliation ----------------------------------------------------------

    def desired_firewall_state(self, institution_id: str) -> FirewallState:
        """What the firewall should enforce, derived from device lifecycle state.

        Block-pending devices count as blocked: that is where the system is
        headed, and reconciliation must not fight the pending retry.
        """
        profile = self.institutions[institution_id].network_profile
        state = default_state(profile.interface)
        for device in self.devices(institution_id=institution_id):
            if not device.ip:
                continue
            if device.state is DeviceState.ACTIVE and device.pending_op != PENDING_BLOCK:
                state.aliases[IOT_ALLOWED].addresses.add(device.ip)
            elif device.state is DeviceState.BLOCKED or device.pending_op == PENDING_BLOCK:
                state.aliases[IOT_BLOCKED].addresses.add(device.ip)
            else:
                continue
            state.mappings[device.mac] = DhcpStaticMapping(device.mac, device.ip, device.name or None)
        return state

    # -- retry helper for approve-time collisions -------------------------------------------------------

    def active_ips(self, institution_id: str) -> set[str]:
        return {d.ip for d in self.devices(institution_id=institution_id, state=DeviceState.ACTIVE) if d.ip}
