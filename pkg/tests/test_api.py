"""HTTP surface: role enforcement, scope confinement, audit coverage, errors."""

import random

import pytest
from fastapi.testclient import TestClient

from iotsentry.domain import Institution, NetworkProfile, Role
from iotsentry.records import IncidentRecord, IncidentStatus
from iotsentry.service import ServiceRuntime, create_app
from iotsentry.service.runtime import RuntimeSettings
from iotsentry.severity import Severity

INST1, INST2 = "inst-1", "inst-2"


def two_campus_settings():
    def inst(inst_id, pool):
        return Institution(inst_id, name=inst_id, network_profile=NetworkProfile("sim://local", ip_pool=pool))

    return RuntimeSettings(
        institutions={INST1: inst(INST1, "192.168.1.0/24"), INST2: inst(INST2, "192.168.2.0/24")},
        users=[
            ("admin1", "pw1", Role.ADMIN, {INST1}),
            ("admin2", "pw2", Role.ADMIN, {INST2}),
            ("root", "pw", Role.SUPERUSER, {INST1, INST2}),
            ("alice", "pw", Role.REGULAR, {INST1}),
            ("bob", "pw", Role.REGULAR, {INST2}),
        ],
        token_secret="api-test-secret",
    )


@pytest.fixture
def runtime():
    return ServiceRuntime(two_campus_settings())


@pytest.fixture
def client(runtime):
    with TestClient(create_app(runtime)) as c:
        yield c


def login(client, username, password="pw"):
    passwords = {"admin1": "pw1", "admin2": "pw2"}
    response = client.post("/auth/token", json={"username": username, "password": passwords.get(username, password)})
    assert response.status_code == 200, response.text
    return {"Authorization": f"Bearer {response.json()['token']}"}


def request_device(client, headers, mac, name="sensor"):
    response = client.post("/devices", json={"mac": mac, "name": name}, headers=headers)
    assert response.status_code == 201, response.text
    return response.json()


# --- authentication ----------------------------------------------------------


def test_token_issuance_and_bad_credentials(client):
    ok = client.post("/auth/token", json={"username": "admin1", "password": "pw1"})
    assert ok.status_code == 200
    assert ok.json()["role"] == "Admin"
    bad = client.post("/auth/token", json={"username": "admin1", "password": "nope"})
    assert bad.status_code == 401
    assert bad.json()["code"] == "bad_credentials"


def test_missing_token_is_401(client):
    response = client.get("/devices")
    assert response.status_code == 401
    body = response.json()
    assert set(body) == {"code", "message", "detail"}


def test_expired_token_is_401(client, runtime):
    token = runtime.issuer.issue("admin1", Role.ADMIN, {INST1}, ttl_seconds=-5)
    response = client.get("/devices", headers={"Authorization": f"Bearer {token.text}"})
    assert response.status_code == 401
    assert response.json()["code"] == "token_expired"


# --- provisioning flow -------------------------------------------------------------


def test_regular_user_requests_device(client):
    alice = login(client, "alice")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    assert doc["state"] == "Pending"
    assert doc["owner_id"] == "alice"


def test_approve_by_regular_is_403(client):
    alice = login(client, "alice")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    response = client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=alice)
    assert response.status_code == 403
    assert response.json()["code"] == "unauthorized"


def test_admin_approves_and_device_goes_active(client):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    response = client.post(f"/devices/{doc['device_id']}/approve", json={"ip": "192.168.1.50"}, headers=admin)
    assert response.status_code == 200
    assert response.json()["state"] == "Active"
    assert response.json()["ip"] == "192.168.1.50"


def test_cross_institution_admin_cannot_approve(client):
    alice = login(client, "alice")
    admin2 = login(client, "admin2")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    response = client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=admin2)
    assert response.status_code == 403


def test_duplicate_mac_is_409(client):
    alice = login(client, "alice")
    request_device(client, alice, "aa:bb:cc:dd:ee:01")
    response = client.post("/devices", json={"mac": "aa:bb:cc:dd:ee:01", "name": "x"}, headers=alice)
    assert response.status_code == 409
    assert response.json()["code"] == "duplicate_mac"


def test_invalid_mac_is_422(client):
    alice = login(client, "alice")
    response = client.post("/devices", json={"mac": "zz:zz", "name": "x"}, headers=alice)
    assert response.status_code == 422


def test_missing_body_is_422_with_stable_shape(client):
    alice = login(client, "alice")
    response = client.post("/devices", json={"name": "x"}, headers=alice)
    assert response.status_code == 422
    assert response.json()["code"] == "schema_violation"


def test_block_unblock_cycle(client, runtime):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=admin)
    blocked = client.post(f"/devices/{doc['device_id']}/block", json={"reason": "test"}, headers=admin)
    assert blocked.status_code == 200
    assert blocked.json()["state"] == "Blocked"
    assert blocked.json()["feedback_id"]
    again = client.post(f"/devices/{doc['device_id']}/block", json={}, headers=admin)
    assert again.status_code == 409  # not idempotent by design
    restored = client.post(f"/devices/{doc['device_id']}/unblock", headers=admin)
    assert restored.status_code == 200
    assert restored.json()["state"] == "Active"


def test_unknown_device_404(client):
    admin = login(client, "admin1")
    response = client.post("/devices/nope/approve", json={}, headers=admin)
    assert response.status_code == 404


def test_firewall_unreachable_maps_to_503(client, runtime):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    runtime.firewalls[INST1].set_offline(True)
    response = client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=admin)
    assert response.status_code == 503
    assert response.json()["code"] == "firewall_unreachable"


# --- device listing scope ------------------------------------------------------------


def seed_devices(client):
    alice = login(client, "alice")
    bob = login(client, "bob")
    admin1 = login(client, "admin1")
    request_device(client, alice, "aa:bb:cc:dd:ee:01", "alice-cam")
    request_device(client, bob, "aa:bb:cc:dd:ee:02", "bob-cam")
    return alice, bob, admin1


def test_device_listing_scope(client):
    alice, bob, admin1 = seed_devices(client)
    assert {d["owner_id"] for d in client.get("/devices", headers=alice).json()["devices"]} == {"alice"}
    assert {d["owner_id"] for d in client.get("/devices", headers=admin1).json()["devices"]} == {"alice"}
    root = login(client, "root")
    assert {d["owner_id"] for d in client.get("/devices", headers=root).json()["devices"]} == {"alice", "bob"}


def test_regular_cannot_read_others_device(client):
    alice, bob, _ = seed_devices(client)
    bob_id = client.get("/devices", headers=bob).json()["devices"][0]["device_id"]
    assert client.get(f"/devices/{bob_id}", headers=alice).status_code == 403


# --- incidents scope and filters ----------------------------------------------------


def seed_incidents(runtime):
    seeded = []
    for i in range(12):
        institution = [INST1, INST2, None][i % 3]
        severity = [Severity.CRITICAL, Severity.MEDIUM, Severity.LOW, Severity.HIGH][i % 4]
        record = IncidentRecord(
            incident_id=f"inc-{i:03d}",
            ts=1700000000.0 + i,
            src_ip=f"192.168.1.{i + 10}",
            note="HTTP::SQL_Injection_Attacker" if severity is Severity.CRITICAL else "Scan::Port_Scan",
            severity=severity,
            device_id=f"d-{i}" if institution else None,
            institution_id=institution,
            status=IncidentStatus.NEW,
            created_at=1700000100.0 + i,
        )
        runtime.storage.put("zeek_incidents", record)
        seeded.append(record)
    return seeded


def test_incident_scope_matches_filter_oracle(client, runtime):
    seeded = seed_incidents(runtime)
    admin1 = login(client, "admin1")
    got = client.get("/incidents", headers=admin1).json()["incidents"]
    # Oracle: linear filter of the seeded set by institution scope.
    expected = [r.incident_id for r in seeded if r.institution_id == INST1]
    assert [r["incident_id"] for r in got] == expected

    critical = client.get("/incidents", params={"severity": "critical"}, headers=admin1).json()["incidents"]
    expected_critical = [r.incident_id for r in seeded if r.institution_id == INST1 and r.severity is Severity.CRITICAL]
    assert [r["incident_id"] for r in critical] == expected_critical


def test_superuser_sees_uncorrelated_incidents(client, runtime):
    seeded = seed_incidents(runtime)
    root = login(client, "root")
    got = {r["incident_id"] for r in client.get("/incidents", headers=root).json()["incidents"]}
    assert got == {r.incident_id for r in seeded}


def test_regular_denied_incident_feed(client, runtime):
    seed_incidents(runtime)
    alice = login(client, "alice")
    assert client.get("/incidents", headers=alice).status_code == 403


def test_incident_cursor_pagination(client, runtime):
    seed_incidents(runtime)
    root = login(client, "root")
    first = client.get("/incidents", params={"limit": 5}, headers=root).json()
    assert len(first["incidents"]) == 5
    second = client.get("/incidents", params={"cursor": first["cursor"]}, headers=root).json()
    ids = [r["incident_id"] for r in first["incidents"] + second["incidents"]]
    assert ids == sorted(set(ids))  # no duplicates, stable order


def test_scope_confinement_fuzz(client, runtime):
    seeded = seed_incidents(runtime)
    rng = random.Random(4)
    scopes = {"admin1": {INST1}, "admin2": {INST2}, "root": {INST1, INST2, None}}
    for _ in range(30):
        username = rng.choice(list(scopes))
        headers = login(client, username)
        severity = rng.choice([None, "critical", "medium", "low", "high"])
        params = {"severity": severity} if severity else {}
        body = client.get("/incidents", params=params, headers=headers).json()
        for record in body["incidents"]:
            assert record["institution_id"] in scopes[username]


# --- firewall router --------------------------------------------------------------------


def test_firewall_state_and_sync(client):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    client.post(f"/devices/{doc['device_id']}/approve", json={"ip": "192.168.1.50"}, headers=admin)
    state = client.get("/firewall/state", headers=admin).json()
    allowed = next(a for a in state["aliases"] if a["name"] == "iot_allowed")
    assert allowed["address"] == ["192.168.1.50"]

    sync = client.post("/firewall/sync", json={}, headers=admin)
    assert sync.status_code == 200
    assert sync.json()["plan"]["conflicts"] == []
    conflicts = client.get("/firewall/conflicts", headers=admin)
    assert conflicts.json()["conflicts"] == []


def test_sync_converges_out_of_band_drift(client, runtime):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    client.post(f"/devices/{doc['device_id']}/approve", json={"ip": "192.168.1.50"}, headers=admin)
    # Drift: someone hand-edits the firewall, dropping the allowed entry.
    fw = runtime.firewalls[INST1]
    fw.remove_addresses_from_alias("iot_allowed", {"192.168.1.50"})
    fw.apply_changes()
    client.post("/firewall/sync", json={}, headers=admin)
    state = fw.get_state(committed=True)
    assert "192.168.1.50" in state.aliases["iot_allowed"].addresses


def test_firewall_routes_denied_for_regular(client):
    alice = login(client, "alice")
    assert client.get("/firewall/state", headers=alice).status_code == 403
    assert client.post("/firewall/sync", json={}, headers=alice).status_code == 403


# --- feedback route ---------------------------------------------------------------------


def test_feedback_history_visible_to_admin(client):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=admin)
    client.post(f"/devices/{doc['device_id']}/block", json={"reason": "r"}, headers=admin)
    rows = client.get("/feedback", headers=admin).json()["feedback"]
    assert len(rows) == 1
    assert rows[0]["device_id"] == doc["device_id"]
    assert rows[0]["t_commit"] is not None


# --- audit coverage -----------------------------------------------------------------------


def test_every_mutating_2xx_has_an_audit_entry(client, runtime):
    alice = login(client, "alice")
    admin = login(client, "admin1")
    doc = request_device(client, alice, "aa:bb:cc:dd:ee:01")
    client.post(f"/devices/{doc['device_id']}/approve", json={}, headers=admin)
    client.post(f"/devices/{doc['device_id']}/block", json={}, headers=admin)
    client.post(f"/devices/{doc['device_id']}/unblock", headers=admin)
    client.post("/firewall/sync", json={}, headers=admin)
    client.post("/devices/nope/approve", json={}, headers=admin)  # 404: no audit
    client.get("/devices", headers=admin)  # GET: no audit
    # mutating 2xx: 2 logins + request + approve + block + unblock + sync = 7
    api_entries = runtime.storage.query("audit_log", {"origin": "api"})
    assert len(api_entries) == 7
    assert all(entry.actor != "anonymous" for entry in api_entries)


# --- route surface closure ------------------------------------------------------------------


def test_unknown_routes_return_404_never_crash(client):
    rng = random.Random(8)
    alphabet = "abcdefghijklmnopqrstuvwxyz/._-%0123456789"
    admin = login(client, "admin1")
    for _ in range(40):
        path = "/" + "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 25)))
        method = rng.choice(["GET", "POST", "DELETE", "PUT"])
        response = client.request(method, path, headers=admin)
        assert response.status_code in (404, 405), (method, path, response.status_code)


# --- wire firewall mode -----------------------------------------------------------------------


def test_runtime_wire_mode_drives_remote_firewall():
    from iotsentry.firewall import SimulatedFirewall
    from iotsentry.firewall.server import FirewallHttpServer

    appliance = SimulatedFirewall()
    with FirewallHttpServer(appliance, token="wire-secret") as server:
        settings = RuntimeSettings(
            institutions={
                INST1: Institution(
                    INST1,
                    name=INST1,
                    network_profile=NetworkProfile(
                        server.base_url, credential_ref="wire-secret", ip_pool="192.168.1.0/24"
                    ),
                )
            },
            users=[("admin1", "pw1", Role.ADMIN, {INST1}), ("alice", "pw", Role.REGULAR, {INST1})],
            firewall_mode="wire",
            token_secret="api-test-secret",
        )
        runtime = ServiceRuntime(settings)
        with TestClient(create_app(runtime)) as client:
            alice = login(client, "alice")
            admin = login(client, "admin1")
            doc = request_device(client, alice, "aa:bb:cc:dd:ee:42")
            approved = client.post(
                f"/devices/{doc['device_id']}/approve", json={"ip": "192.168.1.50"}, headers=admin
            )
            assert approved.status_code == 200, approved.text
            # the edits landed on the remote appliance, not a local sim
            state = appliance.get_state(committed=True)
            assert "192.168.1.50" in state.aliases["iot_allowed"].addresses
            assert state.mappings["aa:bb:cc:dd:ee:42"].ip == "192.168.1.50"

            blocked = client.post(f"/devices/{doc['device_id']}/block", json={}, headers=admin)
            assert blocked.status_code == 200
            state = appliance.get_state(committed=True)
            assert "192.168.1.50" in state.aliases["iot_blocked"].addresses
            assert "192.168.1.50" not in state.aliases["iot_allowed"].addresses
