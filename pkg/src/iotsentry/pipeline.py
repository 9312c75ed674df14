"""The automatic-response worker.

A single consumer drains the tailer stream, runs the incident engine, and
executes block actions through the registry under the system responder
principal. Storage outages requeue the batch (persistence is idempotent);
firewall outages park the block on the device and the retry loop finishes it.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from typing import Callable, Optional

from .clock import NULL_CLOCK, OperationClock, now
from .domain import SYSTEM_RESPONDER
from .errors import FirewallUnreachable, IllegalTransition, StorageUnavailable, Unauthorized
from .incidents import ACTION_BLOCK, IncidentEngine
from .registry import DeviceRegistry, IncidentContext
from .zeekio import Cursor, ParseQuarantine, ZeekNotice

logger = logging.getLogger(__name__)

EventCallback = Callable[[str, dict], None]


class ResponsePipeline:
    def __init__(
        self,
        engine: IncidentEngine,
        registry: DeviceRegistry,
        ops: OperationClock | None = None,
        on_event: EventCallback | None = None,
        idle_wait: float = 0.05,
    ):
        self.engine = engine
        self.registry = registry
        self.ops = ops or NULL_CLOCK
        self.on_event = on_event
        self.idle_wait = idle_wait
        self._pending: deque[ZeekNotice] = deque()
        self._cond = threading.Condition()
        self._last_cursor: Optional[Cursor] = None

    # -- ingestion side -------------------------------------------------------

    def feed(self, cursor: Cursor, record) -> None:
        """Accept one tailer record; quarantines are counted upstream, not processed."""
        if self._last_cursor is not None and cursor <= self._last_cursor:
            return  # at-least-once replay, already handled
        self._last_cursor = cursor
        if isinstance(record, ParseQuarantine):
            logger.debug("dropping quarantined line %d: %s", record.line_number, record.reason)
            return
        with self._cond:
            self._pending.append(record)
            self._cond.notify()

    def pump(self, tailer, stop: threading.Event) -> None:
        """Drive a NoticeTailer into this pipeline (runs on the tailer thread)."""
        for cursor, record in tailer.events(stop):
            self.feed(cursor, record)

    # -- processing side ----------------------------------------------------------

    def _emit(self, kind: str, **payload) -> None:
        if self.on_event is not None:
            self.on_event(kind, payload)

    def run_once(self) -> bool:
        """Process one batch; returns False when there was nothing to do."""
        with self._cond:
            if not self._pending:
                return False
        with self.ops.track("get_logs"):
            with self._cond:
                batch = list(self._pending)
                self._pending.clear()
        if not batch:
            return False
        self._emit("batch", size=len(batch))
        try:
            results = self.engine.process_incidents(batch)
        except StorageUnavailable:
            logger.warning("storage unavailable; requeueing %d notices", len(batch))
            with self._cond:
                self._pending.extendleft(reversed(batch))
            return True
        decided_at = now()
        for record, action in results:
            self._emit("incident", incident_id=record.incident_id, note=record.note, src_ip=record.src_ip)
            if action.kind != ACTION_BLOCK:
                continue
            context = IncidentContext(
                incident_id=record.incident_id, notice_ts=record.ts, decided_at=decided_at
            )
            try:
                device, feedback_id = self.registry.block_device(
                    SYSTEM_RESPONDER, action.device_id, reason=action.reason, incident=context
                )
                self._emit("blocked", device_id=device.device_id, mac=device.mac, feedback_id=feedback_id)
            except FirewallUnreachable:
                self._emit("block_pending", device_id=action.device_id)
            except (IllegalTransition, Unauthorized) as exc:
                logger.info("block action skipped for %s: %s", action.device_id, exc.message)
                self._emit("block_skipped", device_id=action.device_id, reason=exc.message)
        return True

    def run(self, stop: threading.Event) -> None:
        while not stop.is_set():
            worked = self.run_once()
            if not worked:
                self.registry.retry_pending()
                with self._cond:
                    if not self._pending:
                        self._cond.wait(self.idle_wait)
