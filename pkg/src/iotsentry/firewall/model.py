"""Firewall control-plane value types.

The orchestrator owns two reserved host aliases, ``iot_allowed`` and
``iot_blocked``; filter rules reference aliases so membership changes
retarget enforcement without rewriting rules.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum

from ..addrs import canonical_address

IOT_ALLOWED = "iot_allowed"
IOT_BLOCKED = "iot_blocked"
RESERVED_ALIASES = (IOT_ALLOWED, IOT_BLOCKED)


@dataclass
class Alias:
    name: str
    addresses: set[str] = field(default_factory=set)
    kind: str = "host"
    description: str = ""

    def normalized(self) -> "Alias":
        return Alias(
            name=self.name,
            addresses={canonical_address(a) for a in self.addresses},
            kind=self.kind,
            description=self.description,
        )


@dataclass(frozen=True)
class FilterRule:
    rule_id: str
    action: str  # "pass" | "block"
    source_alias: str
    interface: str = "lan"
    position: int = 0


@dataclass(frozen=True)
class DhcpStaticMapping:
    mac: str  # canonical
    ip: str
    hostname: str | None = None


@dataclass
class FirewallState:
    aliases: dict[str, Alias] = field(default_factory=dict)
    rules: list[FilterRule] = field(default_factory=list)
    mappings: dict[str, DhcpStaticMapping] = field(default_factory=dict)  # keyed by mac
    generation: int = 0

    def clone(self) -> "FirewallState":
        return FirewallState(
            aliases={name: Alias(a.name, set(a.addresses), a.kind, a.description) for name, a in self.aliases.items()},
            rules=list(self.rules),
            mappings=dict(self.mappings),
            generation=self.generation,
        )

    def content_equal(self, other: "FirewallState") -> bool:
        """Equality on enforced content, ignoring the generation counter."""
        return (
            {n: a.addresses for n, a in self.aliases.items()} == {n: a.addresses for n, a in other.aliases.items()}
            and self.mappings == other.mappings
            and self.rules == other.rules
        )

    def validate(self) -> None:
        for rule in self.rules:
            if rule.source_alias not in self.aliases:
                raise ValueError(f"rule {rule.rule_id} references missing alias {rule.source_alias}")
        for name in RESERVED_ALIASES:
            if name not in self.aliases:
                raise ValueError(f"reserved alias {name} missing")
        by_ip: dict[str, str] = {}
        for mapping in self.mappings.values():
            if mapping.ip in by_ip:
                raise ValueError(f"ip {mapping.ip} mapped twice")
            by_ip[mapping.ip] = mapping.mac


@dataclass(frozen=True)
class CommitReceipt:
    generation: int
    applied_at: float
    noop: bool = False


class ConflictKind(str, Enum):
    DUAL_MEMBERSHIP = "DualMembership"
    MAC_MISMATCH = "MacMismatch"
    IP_COLLISION = "IpCollision"
    UNKNOWN_REMOTE_ENTRY = "UnknownRemoteEntry"


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    subject: str
    detail: str = ""


def default_state(interface: str = "lan") -> FirewallState:
    """Fresh firewall content: reserved aliases plus the two enforcement rules.

    The block rule sorts first so dual membership fails closed; anything in
    neither alias is blocked by the default-deny tail.
    """
    state = FirewallState(
        aliases={
            IOT_ALLOWED: Alias(IOT_ALLOWED, set(), description="devices admitted to the network"),
            IOT_BLOCKED: Alias(IOT_BLOCKED, set(), description="devices denied network access"),
        },
        rules=[
            FilterRule("rule-block-iot", "block", IOT_BLOCKED, interface, position=10),
            FilterRule("rule-pass-iot", "pass", IOT_ALLOWED, interface, position=20),
        ],
        mappings={},
        generation=0,
    )
    return state


def deep_state_copy(state: FirewallState) -> FirewallState:
    return copy.deepcopy(state)
