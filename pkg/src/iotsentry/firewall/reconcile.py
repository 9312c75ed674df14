"""Bidirectional desired-state reconciliation.

``reconcile`` computes the delta that makes the remote firewall match the
locally desired state. Conflicts are reported, never auto-resolved: entries
the local side does not know about are flagged instead of deleted, and an
address sitting in both reserved aliases is always surfaced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Alias,
    Conflict,
    ConflictKind,
    DhcpStaticMapping,
    FirewallState,
    IOT_ALLOWED,
    IOT_BLOCKED,
)


@dataclass
class SyncPlan:
    alias_adds: dict[str, set[str]] = field(default_factory=dict)
    alias_removes: dict[str, set[str]] = field(default_factory=dict)
    mapping_upserts: list[DhcpStaticMapping] = field(default_factory=list)
    mapping_deletes: list[str] = field(default_factory=list)
    conflicts: list[Conflict] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (
            self.alias_adds or self.alias_removes or self.mapping_upserts or self.mapping_deletes
        )

    def summary(self) -> dict:
        return {
            "alias_adds": {k: sorted(v) for k, v in self.alias_adds.items()},
            "alias_removes": {k: sorted(v) for k, v in self.alias_removes.items()},
            "mapping_upserts": [
                {"mac": m.mac, "ipaddr": m.ip, "hostname": m.hostname} for m in self.mapping_upserts
            ],
            "mapping_deletes": list(self.mapping_deletes),
            "conflicts": [
                {"kind": c.kind.value, "subject": c.subject, "detail": c.detail} for c in self.conflicts
            ],
        }


def _dual_membership(state: FirewallState, side: str, seen: set[str], conflicts: list[Conflict]) -> None:
    allowed = state.aliases.get(IOT_ALLOWED)
    blocked = state.aliases.get(IOT_BLOCKED)
    if allowed is None or blocked is None:
        return
    for address in sorted(allowed.addresses & blocked.addresses):
        if address not in seen:
            seen.add(address)
            conflicts.append(
                Conflict(
                    ConflictKind.DUAL_MEMBERSHIP,
                    address,
                    f"present in both {IOT_ALLOWED} and {IOT_BLOCKED} on {side} state",
                )
            )


def reconcile(local: FirewallState, remote: FirewallState) -> SyncPlan:
    """Plan the remote edits that converge it to the local desired state."""
    plan = SyncPlan()
    dual_seen: set[str] = set()
    _dual_membership(local, "local", dual_seen, plan.conflicts)
    _dual_membership(remote, "remote", dual_seen, plan.conflicts)

    for name, local_alias in local.aliases.items():
        remote_alias = remote.aliases.get(name)
        remote_addresses = remote_alias.addresses if remote_alias else set()
        adds = local_alias.addresses - remote_addresses
        removes = remote_addresses - local_alias.addresses
        if adds:
            plan.alias_adds[name] = adds
        if removes:
            plan.alias_removes[name] = removes
    for name in remote.aliases:
        if name not in local.aliases:
            plan.conflicts.append(
                Conflict(ConflictKind.UNKNOWN_REMOTE_ENTRY, f"alias:{name}", "alias unknown to local state")
            )

    # Mappings keyed by MAC. Remote-only entries are never deleted silently;
    # a MAC bound to a different IP remotely is drift we flag, not stomp.
    retained_remote_ips: dict[str, str] = {}
    upserts: list[DhcpStaticMapping] = []
    for mac, remote_map in remote.mappings.items():
        local_map = local.mappings.get(mac)
        if local_map is None:
            plan.conflicts.append(
                Conflict(ConflictKind.UNKNOWN_REMOTE_ENTRY, f"mapping:{mac}", "static mapping unknown to local state")
            )
            retained_remote_ips[remote_map.ip] = mac
        elif local_map.ip != remote_map.ip:
            plan.conflicts.append(
                Conflict(
                    ConflictKind.MAC_MISMATCH,
                    mac,
                    f"mapped to {remote_map.ip} remotely but {local_map.ip} locally",
                )
            )
            retained_remote_ips[remote_map.ip] = mac
    for mac, local_map in local.mappings.items():
        remote_map = remote.mappings.get(mac)
        if remote_map is None or (remote_map.ip == local_map.ip and remote_map != local_map):
            upserts.append(local_map)
    for mapping in upserts:
        owner = retained_remote_ips.get(mapping.ip)
        if owner is not None and owner != mapping.mac:
            plan.conflicts.append(
                Conflict(
                    ConflictKind.IP_COLLISION,
                    mapping.ip,
                    f"desired for {mapping.mac} but held remotely by {owner}",
                )
            )
        else:
            plan.mapping_upserts.append(mapping)
    return plan


def apply_plan_to_state(plan: SyncPlan, remote: FirewallState) -> FirewallState:
    """Pure application of a plan to a remote-state snapshot."""
    state = remote.clone()
    for name, adds in plan.alias_adds.items():
        alias = state.aliases.get(name)
        if alias is None:
            alias = Alias(name)
            state.aliases[name] = alias
        alias.addresses |= adds
    for name, removes in plan.alias_removes.items():
        alias = state.aliases.get(name)
        if alias is not None:
            alias.addresses -= removes
    for mapping in plan.mapping_upserts:
        state.mappings[mapping.mac] = mapping
    for mac in plan.mapping_deletes:
        state.mappings.pop(mac, None)
    return state


def apply_plan(plan: SyncPlan, backend) -> None:
    """Stage a plan's non-conflicting edits on a live backend and commit."""
    for name, adds in plan.alias_adds.items():
        backend.add_addresses_to_alias(name, adds)
    for name, removes in plan.alias_removes.items():
        backend.remove_addresses_from_alias(name, removes)
    for mapping in plan.mapping_upserts:
        backend.upsert_dhcp_mapping(mapping.mac, mapping.ip, mapping.hostname)
    for mac in plan.mapping_deletes:
        backend.delete_dhcp_mapping(mac)
    if not plan.empty:
        backend.apply_changes()
