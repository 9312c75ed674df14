from .model import (
    Alias,
    CommitReceipt,
    Conflict,
    ConflictKind,
    DhcpStaticMapping,
    FilterRule,
    FirewallState,
    IOT_ALLOWED,
    IOT_BLOCKED,
    default_state,
)
from .reconcile import apply_plan_to_state, reconcile, SyncPlan
from .sim import SimulatedFirewall
from .wire import WireFirewallClient

__all__ = [
    "Alias",
    "CommitReceipt",
    "Conflict",
    "ConflictKind",
    "DhcpStaticMapping",
    "FilterRule",
    "FirewallState",
    "IOT_ALLOWED",
    "IOT_BLOCKED",
    "default_state",
    "SyncPlan",
    "reconcile",
    "apply_plan_to_state",
    "SimulatedFirewall",
    "WireFirewallClient",
]
