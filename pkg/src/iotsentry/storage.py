"""Durable storage for devices, requests, leases, incidents, and feedback.

Six named stores back the rest of the system. Records are frozen dataclasses;
``put`` is atomic per record, cross-store composites go through the staged
:meth:`Storage.batch` protocol, and everything can be journaled to a single
append-only JSONL file so a restart replays to the same state. The export
surface writes one schema-versioned JSONL file per store for audit.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import threading
import typing
import uuid
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

from .clock import now
from .domain import Device, DeviceState
from .errors import (
    FieldAlreadySet,
    MonotonicityViolation,
    SchemaViolation,
    StorageUnavailable,
    UnknownStore,
)
from .records import (
    AccessRequest,
    AuditEntry,
    BlockingFeedback,
    IncidentRecord,
    INCIDENT_STATUS_FLOW,
    LeaseRecord,
)

logger = logging.getLogger(__name__)

FEEDBACK_COMPLETION_FIELDS = ("t_attack_start", "t_commit", "t_loss_of_access", "unblocked_at")


@dataclass(frozen=True)
class StoreSpec:
    record_type: type
    id_field: str
    ts_field: str
    schema_version: int = 1


STORES: dict[str, StoreSpec] = {
    "devices": StoreSpec(Device, "device_id", "created_at"),
    "access_requests": StoreSpec(AccessRequest, "request_id", "submitted_at"),
    "leases": StoreSpec(LeaseRecord, "lease_id", "start"),
    "zeek_incidents": StoreSpec(IncidentRecord, "incident_id", "created_at"),
    "blocking_feedback_history": StoreSpec(BlockingFeedback, "feedback_id", "t_decision"),
    "audit_log": StoreSpec(AuditEntry, "entry_id", "ts"),
}


def _check_feedback_order(fb: BlockingFeedback) -> None:
    if fb.t_notice > fb.t_decision:
        raise MonotonicityViolation("t_notice must not exceed t_decision")
    if fb.t_commit is not None and fb.t_decision > fb.t_commit:
        raise MonotonicityViolation("t_decision must not exceed t_commit")
    if fb.t_loss_of_access is not None and fb.t_commit is not None and fb.t_loss_of_access < fb.t_commit:
        raise MonotonicityViolation("t_loss_of_access must not precede t_commit")


# --- generic dataclass <-> JSON plumbing -----------------------------------


def encode_record(record: Any) -> dict:
    def convert(value):
        if isinstance(value, Enum):
            return value.name if not isinstance(value, str) else value.value
        if isinstance(value, (list, tuple)):
            return [convert(v) for v in value]
        if dataclasses.is_dataclass(value):
            return {f.name: convert(getattr(value, f.name)) for f in dataclasses.fields(value)}
        return value

    return convert(record)


def decode_record(record_type: type, data: dict) -> Any:
    hints = typing.get_type_hints(record_type)
    kwargs = {}
    for f in dataclasses.fields(record_type):
        if f.name not in data:
            continue
        kwargs[f.name] = _decode_value(hints[f.name], data[f.name])
    return record_type(**kwargs)


def _decode_value(hint, value):
    if value is None:
        return None
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        for arg in typing.get_args(hint):
            if arg is type(None):
                continue
            return _decode_value(arg, value)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint[value]
        except KeyError:
            return hint(value)
    if isinstance(hint, type) and dataclasses.is_dataclass(hint):
        return decode_record(hint, value)
    if origin in (tuple, list):
        args = typing.get_args(hint)
        inner = args[0] if args else None
        items = [_decode_value(inner, v) if inner else v for v in value]
        return tuple(items) if origin is tuple else items
    return value


# --- the storage engine ------------------------------------------------------


@dataclass
class _Row:
    record: Any
    seq: int


class Storage:
    """In-memory stores with an optional append-only journal.

    Concurrency: one coarse lock serializes writers; readers copy under the
    lock. Composite writes stage through :meth:`batch` and apply all-or-none.
    """

    def __init__(self, path: str | os.PathLike | None = None, id_factory: Callable[[], str] | None = None):
        self._rows: dict[str, dict[str, _Row]] = {name: {} for name in STORES}
        self._lock = threading.RLock()
        self._seq = 0
        self._offline = False
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex)
        self.failpoint_hook: Callable[[str], None] | None = None
        self._journal_path = Path(path) if path is not None else None
        self._journal_fh = None
        if self._journal_path is not None:
            self._replay_journal()
            self._journal_fh = open(self._journal_path, "a", encoding="utf-8")
            if self._journal_path.stat().st_size == 0:
                self._journal({"op": "descriptor", "stores": self.descriptor()})

    # -- helpers -------------------------------------------------------------

    def new_id(self) -> str:
        return self._id_factory()

    def descriptor(self) -> dict[str, int]:
        return {name: spec.schema_version for name, spec in STORES.items()}

    def set_offline(self, offline: bool = True) -> None:
        self._offline = offline

    def _check_available(self) -> None:
        if self._offline:
            raise StorageUnavailable("storage backend offline")

    def _fire(self, name: str) -> None:
        if self.failpoint_hook is not None:
            self.failpoint_hook(name)

    def _spec(self, store: str) -> StoreSpec:
        try:
            return STORES[store]
        except KeyError:
            raise UnknownStore(f"no store named {store!r}") from None

    def _journal(self, entry: dict) -> None:
        if self._journal_fh is None:
            return
        self._journal_fh.write(json.dumps(entry) + "\n")
        self._journal_fh.flush()

    def _replay_journal(self) -> None:
        if not self._journal_path.exists():
            return
        with open(self._journal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    logger.warning("skipping torn journal line")
                    continue
                if entry.get("op") == "descriptor":
                    for name, version in entry.get("stores", {}).items():
                        if name in STORES and version > STORES[name].schema_version:
                            raise SchemaViolation(
                                f"journal store {name} at schema v{version}, "
                                f"this build understands v{STORES[name].schema_version}"
                            )
                elif entry.get("op") == "put":
                    self._apply(entry["store"], decode_record(self._spec(entry["store"]).record_type, entry["record"]))
                elif entry.get("op") == "batch":
                    for item in entry.get("entries", []):
                        self._apply(item["store"], decode_record(self._spec(item["store"]).record_type, item["record"]))

    # -- validation ------------------------------------------------------------

    def _validate(self, store: str, record: Any) -> str:
        spec = self._spec(store)
        if not isinstance(record, spec.record_type):
            raise SchemaViolation(
                f"store {store} holds {spec.record_type.__name__}, got {type(record).__name__}"
            )
        record_id = getattr(record, spec.id_field)
        if not record_id:
            raise SchemaViolation(f"{spec.id_field} must be set")
        if store == "devices":
            self._validate_device(record)
        elif store == "leases":
            self._validate_lease(record)
        elif store == "blocking_feedback_history":
            try:
                _check_feedback_order(record)
            except MonotonicityViolation as exc:
                raise SchemaViolation(exc.message) from None
        elif store == "zeek_incidents":
            self._validate_incident(record)
        return record_id

    def _validate_device(self, device: Device) -> None:
        if device.state in (DeviceState.ACTIVE, DeviceState.BLOCKED) and not device.ip:
            raise SchemaViolation(f"device in {device.state.value} must carry an IP")
        if device.mac != device.mac.lower():
            raise SchemaViolation("device MAC must be canonical lowercase")

    def _validate_lease(self, lease: LeaseRecord) -> None:
        if lease.end is not None and lease.end < lease.start:
            raise SchemaViolation("lease end precedes start")
        for row in self._rows["leases"].values():
            other: LeaseRecord = row.record
            if other.lease_id == lease.lease_id or other.ip != lease.ip:
                continue
            a_end = lease.end if lease.end is not None else float("inf")
            b_end = other.end if other.end is not None else float("inf")
            if lease.start < b_end and other.start < a_end:
                raise SchemaViolation(f"lease interval for {lease.ip} overlaps {other.lease_id}")

    def _validate_incident(self, incident: IncidentRecord) -> None:
        existing = self._rows["zeek_incidents"].get(incident.incident_id)
        if existing is None:
            return
        old_status = existing.record.status
        if incident.status is old_status:
            return
        if incident.status not in INCIDENT_STATUS_FLOW[old_status]:
            raise SchemaViolation(
                f"incident status may not move {old_status.value} -> {incident.status.value}"
            )

    # -- core operations ---------------------------------------------------------

    def _apply(self, store: str, record: Any) -> str:
        spec = STORES[store]
        record_id = getattr(record, spec.id_field)
        rows = self._rows[store]
        if record_id in rows:
            rows[record_id] = _Row(record, rows[record_id].seq)
        else:
            self._seq += 1
            rows[record_id] = _Row(record, self._seq)
        return record_id

    def put(self, store: str, record: Any) -> str:
        self._check_available()
        with self._lock:
            record_id = self._validate(store, record)
            self._apply(store, record)
            self._journal({"op": "put", "store": store, "id": record_id, "record": encode_record(record)})
        return record_id

    def get(self, store: str, record_id: str) -> Any | None:
        self._check_available()
        self._spec(store)
        with self._lock:
            row = self._rows[store].get(record_id)
        return row.record if row else None

    def _sort_key(self, store: str):
        spec = STORES[store]

        def key(row: _Row):
            ts = getattr(row.record, spec.ts_field, None)
            return (ts if ts is not None else float(row.seq), getattr(row.record, spec.id_field))

        return key

    def query(self, store: str, where: dict | Callable[[Any], bool] | None = None) -> list:
        """All matching records in deterministic (ts, id) order."""
        self._check_available()
        self._spec(store)
        with self._lock:
            rows = sorted(self._rows[store].values(), key=self._sort_key(store))
        records = [row.record for row in rows]
        if where is None:
            return records
        if callable(where):
            return [r for r in records if where(r)]
        return [r for r in records if all(getattr(r, k, None) == v for k, v in where.items())]

    def page(
        self,
        store: str,
        where: dict | Callable[[Any], bool] | None = None,
        after: str | None = None,
        limit: int | None = None,
    ) -> tuple[list, str | None]:
        """Cursor pagination, stable under concurrent appends.

        The cursor encodes the last row's (ts, id) sort key, so later inserts
        never shift an already-served page.
        """
        spec = self._spec(store)
        records = self.query(store, where)
        if after:
            ts_text, _, last_id = after.partition("/")
            boundary = (float(ts_text), last_id)
            records = [
                r
                for r in records
                if (getattr(r, spec.ts_field) or 0.0, getattr(r, spec.id_field)) > boundary
            ]
        if limit is not None:
            records = records[:limit]
        cursor = None
        if records:
            tail = records[-1]
            cursor = f"{getattr(tail, spec.ts_field):.6f}/{getattr(tail, spec.id_field)}"
        return records, cursor

    def count(self, store: str) -> int:
        self._spec(store)
        with self._lock:
            return len(self._rows[store])

    # -- staged composite commits ----------------------------------------------

    def batch(self) -> "_Batch":
        return _Batch(self)

    def _commit_batch(self, staged: list[tuple[str, Any]]) -> list[str]:
        self._check_available()
        with self._lock:
            self._fire("batch_pre_validate")
            ids = [self._validate(store, record) for store, record in staged]
            self._fire("batch_pre_apply")
            for store, record in staged:
                self._apply(store, record)
            self._journal(
                {
                    "op": "batch",
                    "entries": [
                        {"store": store, "id": getattr(record, STORES[store].id_field), "record": encode_record(record)}
                        for store, record in staged
                    ],
                }
            )
        return ids

    # -- blocking feedback ledger -------------------------------------------------

    def append_blocking_feedback(self, partial: BlockingFeedback) -> str:
        return self.put("blocking_feedback_history", partial)

    def complete_blocking_feedback(self, feedback_id: str, field_name: str, timestamp: float) -> BlockingFeedback:
        """Write-once completion of one timestamp field, monotonicity enforced."""
        if field_name not in FEEDBACK_COMPLETION_FIELDS:
            raise SchemaViolation(f"{field_name} is not a completion field")
        self._check_available()
        with self._lock:
            row = self._rows["blocking_feedback_history"].get(feedback_id)
            if row is None:
                raise UnknownStore(f"no feedback record {feedback_id}")
            current: BlockingFeedback = row.record
            if getattr(current, field_name) is not None:
                raise FieldAlreadySet(f"{field_name} already recorded for {feedback_id}")
            updated = dataclasses.replace(current, **{field_name: timestamp})
            _check_feedback_order(updated)
            self._apply("blocking_feedback_history", updated)
            self._journal(
                {
                    "op": "put",
                    "store": "blocking_feedback_history",
                    "id": feedback_id,
                    "record": encode_record(updated),
                }
            )
        return updated

    # -- export ------------------------------------------------------------------

    def export(self, out_dir: str | os.PathLike) -> list[Path]:
        """Write one schema-versioned JSONL file per store."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, spec in STORES.items():
            path = out / f"{name}.jsonl"
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"store": name, "schema_version": spec.schema_version}) + "\n")
                for record in self.query(name):
                    fh.write(
                        json.dumps({"id": getattr(record, spec.id_field), "record": encode_record(record)})
                        + "\n"
                    )
            written.append(path)
        return written

    def close(self) -> None:
        if self._journal_fh is not None:
            self._journal_fh.close()
            self._journal_fh = None


class _Batch:
    """Stage records across stores; apply all of them or none on exit."""

    def __init__(self, storage: Storage):
        self._storage = storage
        self._staged: list[tuple[str, Any]] = []
        self.ids: list[str] = []

    def put(self, store: str, record: Any) -> None:
        self._storage._spec(store)
        self._staged.append((store, record))

    def __enter__(self) -> "_Batch":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            self.ids = self._storage._commit_batch(self._staged)
        return False


def iter_export(path: str | os.PathLike) -> Iterable[tuple[str, dict]]:
    """Read back an exported store file: yields (store_name, record_dict)."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        store = header["store"]
        for line in fh:
            if line.strip():
                yield store, json.loads(line)
