#!/usr/bin/env python3
"""Dump the per-role authorize-allow sets from the service into the console's
test fixture. Run from frontend/: python3 scripts/gen_capability_fixture.py
"""

import json
import pathlib

from iotsentry.domain import AUTHORIZE_ACTIONS, Principal, ResourceRef, Role, authorize

INST = "inst-1"


def in_scope_target(role: Role, action: str) -> ResourceRef:
    # A representative in-scope target per action: sessions act on their own
    # institution, and regular users on their own devices.
    if action == "manage_institutions":
        return ResourceRef("institution", institution_id=INST)
    if action == "manage_firewall":
        return ResourceRef("firewall", institution_id=INST)
    if action == "read_incidents":
        return ResourceRef("incident", institution_id=INST)
    owner = "self" if role is Role.REGULAR else "someone-else"
    return ResourceRef("device", institution_id=INST, owner_id=owner)


def allow_set(role: Role) -> list[str]:
    actor = Principal("self", role, frozenset({INST}))
    return sorted(
        action for action in AUTHORIZE_ACTIONS if authorize(actor, action, in_scope_target(role, action))
    )


def main() -> None:
    fixture = {role.value: allow_set(role) for role in (Role.REGULAR, Role.ADMIN, Role.SUPERUSER)}
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "capabilities.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
