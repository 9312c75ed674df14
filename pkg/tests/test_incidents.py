"""Severity policy, correlation, persistence idempotency, response decisions."""

import pytest

from iotsentry.domain import Device, DeviceState
from iotsentry.errors import AmbiguousLease, StorageUnavailable
from iotsentry.incidents import (
    ACTION_BLOCK,
    ACTION_NONE,
    IncidentEngine,
    ResponseAction,
    classify_severity,
    correlate,
    decide_response,
)
from iotsentry.records import IncidentRecord, IncidentStatus, LeaseRecord, LeaseSnapshot
from iotsentry.severity import DEFAULT_POLICY, Severity, SeverityPolicy, parse_policy, render_policy
from iotsentry.storage import Storage
from iotsentry.zeekio import ZeekNotice


def notice(note="HTTP::SQL_Injection_Attacker", src_ip="192.168.1.50", ts=1700000000.0, uid="C1"):
    return ZeekNotice(ts=ts, src_ip=src_ip, note=note, msg="m", uid=uid)


def lease(device_id, ip, start, end=None):
    return LeaseRecord(f"l-{device_id}-{start}", device_id, ip, start, end)


def device(device_id="d-1", state=DeviceState.ACTIVE, ip="192.168.1.50"):
    return Device(
        device_id=device_id, mac="aa:bb:cc:dd:ee:01", owner_id="alice",
        institution_id="inst-1", state=state, ip=ip,
    )


# --- severity policy ----------------------------------------------------------


def test_default_policy_maps_sqli_to_critical():
    # Oracle: direct lookup in the policy's rule list.
    expected = next(sev for pattern, sev in DEFAULT_POLICY.rules if pattern == "HTTP::SQL_Injection_Attacker")
    assert expected is Severity.CRITICAL
    assert classify_severity(notice(), DEFAULT_POLICY) is Severity.CRITICAL


def test_default_severity_when_no_rule_matches():
    policy = SeverityPolicy(rules=(), default_severity=Severity.LOW)
    assert classify_severity(notice(note="Whatever::Unknown"), policy) is Severity.LOW


def test_first_match_wins():
    policy = SeverityPolicy(rules=(("Scan::*", Severity.MEDIUM), ("*", Severity.INFO)), default_severity=Severity.LOW)
    assert classify_severity(notice(note="Scan::Port_Scan"), policy) is Severity.MEDIUM
    assert classify_severity(notice(note="Other::Thing"), policy) is Severity.INFO


def test_severity_total_order():
    assert Severity.INFO < Severity.LOW < Severity.MEDIUM < Severity.HIGH < Severity.CRITICAL


def test_policy_file_roundtrip():
    text = render_policy(DEFAULT_POLICY)
    assert parse_policy(text) == DEFAULT_POLICY


def test_policy_parse_rejects_noise():
    with pytest.raises(ValueError):
        parse_policy("rule only-two-tokens")


# --- correlation ------------------------------------------------------------------


def test_correlate_single_open_lease():
    snapshot = LeaseSnapshot(entries=(lease("d-1", "192.168.1.50", 1690000000.0),), taken_at=1700000001.0)
    assert correlate(notice(), snapshot) == "d-1"


def test_correlate_no_lease():
    snapshot = LeaseSnapshot(entries=(), taken_at=0.0)
    assert correlate(notice(src_ip="10.0.0.9"), snapshot) is None


def test_correlate_historical_intervals_against_linear_scan_oracle():
    leases = (
        lease("d-old", "192.168.1.50", 1000.0, 2000.0),
        lease("d-new", "192.168.1.50", 2000.0, None),
    )
    snapshot = LeaseSnapshot(entries=leases, taken_at=3000.0)
    probe = notice(ts=2500.0)
    # Oracle: linear scan filtering by interval containment.
    expected = [l.device_id for l in leases if l.ip == probe.src_ip and l.start <= probe.ts and (l.end is None or probe.ts < l.end)]
    assert expected == ["d-new"]
    assert correlate(probe, snapshot) == "d-new"
    # Timestamp inside the first interval only.
    assert correlate(notice(ts=1500.0), snapshot) == "d-old"
    # On the boundary the new lease owns the instant (half-open intervals).
    assert correlate(notice(ts=2000.0), snapshot) == "d-new"


def test_correlate_ambiguous_open_leases():
    snapshot = LeaseSnapshot(
        entries=(lease("d-1", "192.168.1.50", 1000.0), lease("d-2", "192.168.1.50", 1500.0)),
        taken_at=2000.0,
    )
    with pytest.raises(AmbiguousLease):
        correlate(notice(ts=1600.0), snapshot)


# --- decide_response -----------------------------------------------------------------


def incident(severity=Severity.CRITICAL, device_id="d-1", status=IncidentStatus.NEW):
    return IncidentRecord(
        incident_id="i-1", ts=1700000000.0, src_ip="192.168.1.50",
        note="HTTP::SQL_Injection_Attacker", severity=severity, device_id=device_id,
        institution_id="inst-1" if device_id else None, status=status,
    )


def test_block_on_critical_active_device():
    action = decide_response(incident(), device())
    assert action.kind == ACTION_BLOCK and action.device_id == "d-1"


def test_none_when_uncorrelated():
    action = decide_response(incident(device_id=None), None)
    assert action.kind == ACTION_NONE
    assert "no correlated device" in action.reason


def test_none_below_critical():
    action = decide_response(incident(severity=Severity.MEDIUM), device())
    assert action.kind == ACTION_NONE
    assert "below critical" in action.reason


def test_none_when_device_not_active():
    action = decide_response(incident(), device(state=DeviceState.BLOCKED))
    assert action.kind == ACTION_NONE
    assert "Blocked" in action.reason


def test_decide_monotone_in_severity():
    # Raising severity never turns a Block into a None.
    dev = device()
    for low in Severity:
        base = decide_response(incident(severity=low), dev)
        for high in Severity:
            if high < low:
                continue
            raised = decide_response(incident(severity=high), dev)
            if base.kind == ACTION_BLOCK:
                assert raised.kind == ACTION_BLOCK


def test_block_action_requires_device():
    with pytest.raises(ValueError):
        ResponseAction(ACTION_BLOCK, "because")


# --- engine: save + process -------------------------------------------------------------


class EngineWorld:
    def __init__(self):
        self.storage = Storage()
        self.devices = {}
        self.leases = ()

    def engine(self):
        return IncidentEngine(
            self.storage,
            policy=DEFAULT_POLICY,
            lease_source=lambda: LeaseSnapshot(entries=self.leases, taken_at=1e12),
            device_source=self.devices.get,
        )


def test_save_incident_persists_and_is_idempotent():
    world = EngineWorld()
    engine = world.engine()
    first = engine.save_incident(notice(), Severity.CRITICAL, device())
    again = engine.save_incident(notice(), Severity.CRITICAL, device())
    assert first.incident_id == again.incident_id
    assert world.storage.count("zeek_incidents") == 1
    assert first.status is IncidentStatus.NEW
    assert first.device_id == "d-1" and first.institution_id == "inst-1"


def test_save_idempotency_survives_engine_restart():
    world = EngineWorld()
    first = world.engine().save_incident(notice(), Severity.CRITICAL, device())
    rebuilt = world.engine()  # index rebuilt from the store
    again = rebuilt.save_incident(notice(), Severity.CRITICAL, device())
    assert again.incident_id == first.incident_id
    assert world.storage.count("zeek_incidents") == 1


def test_save_offline_propagates():
    world = EngineWorld()
    engine = world.engine()
    world.storage.set_offline(True)
    with pytest.raises(StorageUnavailable):
        engine.save_incident(notice(), Severity.LOW, None)


def test_process_single_sqli_notice_blocks():
    world = EngineWorld()
    world.devices["d-1"] = device()
    world.leases = (lease("d-1", "192.168.1.50", 1.0),)
    results = world.engine().process_incidents([notice()])
    assert len(results) == 1
    record, action = results[0]
    assert record.severity is Severity.CRITICAL
    assert record.status is IncidentStatus.ACTIONED
    assert action.kind == ACTION_BLOCK and action.device_id == "d-1"


def test_process_empty_batch():
    assert EngineWorld().engine().process_incidents([]) == []


def test_process_dedupes_blocks_per_device():
    world = EngineWorld()
    world.devices["d-1"] = device()
    world.leases = (lease("d-1", "192.168.1.50", 1.0),)
    batch = [notice(uid=f"C{i}", ts=1700000000.0 + i) for i in range(3)]
    results = world.engine().process_incidents(batch)
    # Oracle: replaying with set semantics, one distinct device gets blocked.
    distinct_blocked = {a.device_id for _, a in results if a.kind == ACTION_BLOCK}
    assert len(distinct_blocked) == 1
    blocks = [a for _, a in results if a.kind == ACTION_BLOCK]
    others = [(r, a) for r, a in results if a.kind != ACTION_BLOCK]
    assert len(blocks) == 1 and len(others) == 2
    for record, action in others:
        assert action.reason == "already blocking"
        assert record.status is IncidentStatus.VALIDATED
    assert [r.uid for r, _ in results] == ["C0", "C1", "C2"]  # input order preserved


def test_process_output_order_equals_input_order_mixed():
    world = EngineWorld()
    world.devices["d-1"] = device()
    world.leases = (lease("d-1", "192.168.1.50", 1.0),)
    batch = [
        notice(note="Scan::Port_Scan", uid="Ca"),
        notice(uid="Cb"),
        notice(note="Weird::thing", uid="Cc"),
    ]
    results = world.engine().process_incidents(batch)
    assert [r.uid for r, _ in results] == ["Ca", "Cb", "Cc"]
    assert [a.kind for _, a in results] == [ACTION_NONE, ACTION_BLOCK, ACTION_NONE]


def test_process_quarantines_ambiguous_lease_and_continues():
    world = EngineWorld()
    world.devices["d-1"] = device()
    world.leases = (lease("d-1", "192.168.1.50", 1.0), lease("d-2", "192.168.1.50", 2.0))
    engine = world.engine()
    batch = [notice(uid="Cbad"), notice(uid="Cok", src_ip="10.1.1.1")]
    results = engine.process_incidents(batch)
    assert [r.uid for r, _ in results] == ["Cok"]
    assert len(engine.quarantine) == 1
    assert engine.quarantine[0].notice.uid == "Cbad"


def test_process_storage_outage_keeps_persisted_prefix():
    world = EngineWorld()
    engine = world.engine()
    count = {"puts": 0}
    original = world.storage.put

    def flaky_put(store, record):
        if store == "zeek_incidents":
            count["puts"] += 1
            if count["puts"] == 3:
                raise StorageUnavailable("disk gone")
        return original(store, record)

    world.storage.put = flaky_put
    batch = [notice(note="Weird::w", uid=f"C{i}", ts=1700.0 + i) for i in range(4)]
    with pytest.raises(StorageUnavailable):
        engine.process_incidents(batch)
    assert world.storage.count("zeek_incidents") == 2  # prefix persisted


def test_replaying_stream_yields_same_store_contents():
    world = EngineWorld()
    world.devices["d-1"] = device(state=DeviceState.APPROVED)  # no blocks, pure persistence
    world.leases = (lease("d-1", "192.168.1.50", 1.0),)
    engine = world.engine()
    batch = [notice(uid=f"C{i}", ts=1700.0 + i, note="Scan::Port_Scan") for i in range(5)]
    engine.process_incidents(batch)
    snapshot_once = world.storage.query("zeek_incidents")
    engine.process_incidents(batch)
    assert world.storage.query("zeek_incidents") == snapshot_once
