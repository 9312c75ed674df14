"""In-process simulated firewall.

Mirrors the staged-config / committed-filter split of the real appliance:
alias and DHCP edits land in the config view immediately, but packet
evaluation only changes when :meth:`apply_changes` commits a generation.
"""

from __future__ import annotations

import threading

from ..addrs import canonical_address, canonical_mac, parse_ipv4
from ..clock import now
from ..errors import AliasNotFound, CommitRejected, FirewallUnreachable, IpCollision
from .model import Alias, CommitReceipt, DhcpStaticMapping, FirewallState, default_state


class SimulatedFirewall:
    """Behavioral stand-in for the firewall endpoint, safe for tests and the harness."""

    def __init__(self, interface: str = "lan"):
        self._config = default_state(interface)
        self._active = default_state(interface)
        self._lock = threading.RLock()
        self._offline = False
        self._reject_next_commit = False
        self._commit_listeners: list = []

    # -- test / harness controls ---------------------------------------------

    def set_offline(self, offline: bool = True) -> None:
        self._offline = offline

    def reject_next_commit(self) -> None:
        self._reject_next_commit = True

    def on_commit(self, callback) -> None:
        """Register a callback(receipt) fired after each non-noop commit."""
        self._commit_listeners.append(callback)

    def _check_reachable(self) -> None:
        if self._offline:
            raise FirewallUnreachable("simulated firewall offline")

    # -- alias operations --------------------------------------------------------

    def _alias(self, name: str) -> Alias:
        alias = self._config.aliases.get(name)
        if alias is None:
            raise AliasNotFound(f"no alias named {name!r}")
        return alias

    def get_alias_by_name(self, name: str) -> Alias:
        self._check_reachable()
        with self._lock:
            alias = self._alias(name)
            return Alias(alias.name, set(alias.addresses), alias.kind, alias.description)

    def add_addresses_to_alias(self, name: str, addrs: set[str]) -> Alias:
        self._check_reachable()
        normalized = {canonical_address(a) for a in addrs}  # InvalidAddress before any change
        with self._lock:
            alias = self._alias(name)
            alias.addresses |= normalized
            return Alias(alias.name, set(alias.addresses), alias.kind, alias.description)

    def remove_addresses_from_alias(self, name: str, addrs: set[str]) -> Alias:
        self._check_reachable()
        with self._lock:
            alias = self._alias(name)
            alias.addresses -= {canonical_address(a) for a in addrs if a}
            return Alias(alias.name, set(alias.addresses), alias.kind, alias.description)

    # -- DHCP static mappings ------------------------------------------------------

    def upsert_dhcp_mapping(self, mac: str, ip: str, hostname: str | None = None) -> DhcpStaticMapping:
        self._check_reachable()
        mac = canonical_mac(mac)
        ip = parse_ipv4(ip)
        with self._lock:
            for other in self._config.mappings.values():
                if other.ip == ip and other.mac != mac:
                    raise IpCollision(f"{ip} already mapped to {other.mac}")
            mapping = DhcpStaticMapping(mac=mac, ip=ip, hostname=hostname)
            self._config.mappings[mac] = mapping
            return mapping

    def delete_dhcp_mapping(self, mac: str) -> None:
        self._check_reachable()
        with self._lock:
            self._config.mappings.pop(canonical_mac(mac), None)

    # -- commit ---------------------------------------------------------------------

    def has_staged_changes(self) -> bool:
        with self._lock:
            return not self._config.content_equal(self._active)

    def apply_changes(self) -> CommitReceipt:
        """Activate staged config atomically; one generation step per commit."""
        self._check_reachable()
        with self._lock:
            if self._reject_next_commit:
                self._reject_next_commit = False
                raise CommitRejected("firewall refused the staged change set")
            if self._config.content_equal(self._active):
                return CommitReceipt(self._active.generation, now(), noop=True)
            snapshot = self._config.clone()
            snapshot.generation = self._active.generation + 1
            self._active = snapshot
            self._config.generation = snapshot.generation
            receipt = CommitReceipt(snapshot.generation, now(), noop=False)
        for callback in self._commit_listeners:
            callback(receipt)
        return receipt

    # -- reads -------------------------------------------------------------------------

    def get_state(self, committed: bool = False) -> FirewallState:
        self._check_reachable()
        with self._lock:
            return (self._active if committed else self._config).clone()

    @property
    def generation(self) -> int:
        with self._lock:
            return self._active.generation

    def evaluate_packet(self, src: str, dst: str | None = None) -> str:
        """First-match verdict over committed rules; default deny."""
        with self._lock:
            state = self._active
            for rule in sorted(state.rules, key=lambda r: r.position):
                alias = state.aliases.get(rule.source_alias)
                if alias is not None and src in alias.addresses:
                    return rule.action
        return "block"
