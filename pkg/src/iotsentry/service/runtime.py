"""Assembled service: storage, registry, engine, firewalls, identity, and the
background ingest/response machinery, bound into one object the API routes
and the CLI share.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Optional

from ..auth import TokenIssuer, UserStore
from ..clock import OperationClock
from ..domain import Institution, NetworkProfile, Role
from ..firewall import SimulatedFirewall, WireFirewallClient, reconcile
from ..firewall.reconcile import SyncPlan, apply_plan
from ..firewall.server import state_to_doc
from ..incidents import IncidentEngine
from ..pipeline import ResponsePipeline
from ..registry import DeviceRegistry
from ..severity import DEFAULT_POLICY, SeverityPolicy
from ..storage import Storage
from ..zeekio import NoticeTailer

logger = logging.getLogger(__name__)

DEFAULT_INSTITUTION = "inst-1"


@dataclass
class RuntimeSettings:
    """Everything needed to stand the service up."""

    institutions: dict[str, Institution] = field(default_factory=dict)
    users: list[tuple[str, str, Role, set[str]]] = field(default_factory=list)
    firewall_mode: str = "simulated"  # "simulated" | "wire"
    storage_path: Optional[str] = None
    notice_log: Optional[str] = None
    poll_interval: float = 0.2
    policy: SeverityPolicy = DEFAULT_POLICY
    token_secret: Optional[str] = None
    sync_interval: float = 0.0  # 0 disables periodic reconcile

    @classmethod
    def single_institution(cls, ip_pool: str = "192.168.1.0/24", **kw) -> "RuntimeSettings":
        inst = Institution(
            DEFAULT_INSTITUTION,
            name="Campus",
            network_profile=NetworkProfile(endpoint="sim://local", interface="lan", ip_pool=ip_pool),
        )
        settings = cls(institutions={DEFAULT_INSTITUTION: inst}, **kw)
        settings.users = [
            ("admin", "admin", Role.ADMIN, {DEFAULT_INSTITUTION}),
            ("root", "root", Role.SUPERUSER, {DEFAULT_INSTITUTION}),
            ("alice", "alice", Role.REGULAR, {DEFAULT_INSTITUTION}),
        ]
        return settings


class ServiceRuntime:
    def __init__(self, settings: RuntimeSettings, ops: OperationClock | None = None):
        self.settings = settings
        self.storage = Storage(settings.storage_path)
        self.users = UserStore()
        for username, password, role, insts in settings.users:
            self.users.add_user(username, password, role, insts)
        self.issuer = TokenIssuer(secret=settings.token_secret)
        self.firewalls: dict[str, object] = {}
        for inst_id, inst in settings.institutions.items():
            if settings.firewall_mode == "wire" and inst.network_profile.endpoint.startswith("http"):
                self.firewalls[inst_id] = WireFirewallClient(
                    inst.network_profile.endpoint, token=inst.network_profile.credential_ref or None
                )
            else:
                self.firewalls[inst_id] = SimulatedFirewall(inst.network_profile.interface)
        self.registry = DeviceRegistry(self.storage, settings.institutions, self.firewalls, ops=ops)
        self.engine = IncidentEngine(
            self.storage,
            policy=settings.policy,
            lease_source=self.registry.lease_snapshot,
            device_source=self.registry.device,
            ops=ops,
        )
        self.pipeline = ResponsePipeline(self.engine, self.registry, ops=ops)
        self.tailer: NoticeTailer | None = None
        if settings.notice_log:
            self.tailer = NoticeTailer(settings.notice_log, poll_interval=settings.poll_interval)
        self.last_sync: dict[str, SyncPlan] = {}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    # -- background machinery -------------------------------------------------

    def start_background(self) -> None:
        self._stop.clear()
        worker = threading.Thread(target=self.pipeline.run, args=(self._stop,), name="responder", daemon=True)
        worker.start()
        self._threads.append(worker)
        if self.tailer is not None:
            pump = threading.Thread(
                target=self.pipeline.pump, args=(self.tailer, self._stop), name="tailer", daemon=True
            )
            pump.start()
            self._threads.append(pump)
        if self.settings.sync_interval > 0:
            syncer = threading.Thread(target=self._sync_loop, name="fw-sync", daemon=True)
            syncer.start()
            self._threads.append(syncer)

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=5)
        self._threads.clear()
        self.storage.close()

    def _sync_loop(self) -> None:
        while not self._stop.wait(self.settings.sync_interval):
            for inst_id in self.firewalls:
                try:
                    self.sync_firewall(inst_id)
                except Exception:
                    logger.exception("periodic firewall sync failed for %s", inst_id)

    # -- firewall views ------------------------------------------------------------

    def default_institution(self) -> str:
        return next(iter(self.settings.institutions))

    def firewall_state_doc(self, institution_id: str) -> dict:
        fw = self.firewalls[institution_id]
        return state_to_doc(fw.get_state(committed=False))

    def sync_firewall(self, institution_id: str) -> SyncPlan:
        """Reconcile desired vs. firewall-held state, apply the plan, keep conflicts."""
        fw = self.firewalls[institution_id]
        desired = self.registry.desired_firewall_state(institution_id)
        remote = fw.get_state(committed=False)
        plan = reconcile(desired, remote)
        apply_plan(plan, fw)
        self.last_sync[institution_id] = plan
        return plan
