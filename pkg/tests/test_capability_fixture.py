"""Guards the console's capability fixture against drift from authorize."""

import json
from pathlib import Path

import pytest

from iotsentry.domain import AUTHORIZE_ACTIONS, Principal, ResourceRef, Role, authorize

FIXTURE = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "capabilities.json"

INST = "inst-1"


def in_scope_target(role: Role, action: str) -> ResourceRef:
    if action == "manage_institutions":
        return ResourceRef("institution", institution_id=INST)
    if action == "manage_firewall":
        return ResourceRef("firewall", institution_id=INST)
    if action == "read_incidents":
        return ResourceRef("incident", institution_id=INST)
    owner = "self" if role is Role.REGULAR else "someone-else"
    return ResourceRef("device", institution_id=INST, owner_id=owner)


@pytest.mark.skipif(not FIXTURE.exists(), reason="console fixture not present")
def test_console_capability_fixture_matches_authorize():
    fixture = json.loads(FIXTURE.read_text())
    for role in (Role.REGULAR, Role.ADMIN, Role.SUPERUSER):
        actor = Principal("self", role, frozenset({INST}))
        expected = sorted(
            action
            for action in AUTHORIZE_ACTIONS
            if authorize(actor, action, in_scope_target(role, action))
        )
        assert fixture[role.value] == expected, (
            f"{role.value} fixture drifted; regenerate with "
            "frontend/scripts/gen_capability_fixture.py"
        )
