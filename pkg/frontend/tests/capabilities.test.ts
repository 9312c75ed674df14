// Capability-rendering equivalence: the console's per-role action sets must
// equal the service's authorize-allow sets (fixture regenerated by
// scripts/gen_capability_fixture.py from the running service code).

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { capabilitiesForRole, guardRoute, routeAreasForRole } from "../src/capabilities.js";
import type { Role } from "../src/types.js";

const fixturePath = fileURLToPath(new URL("./fixtures/capabilities.json", import.meta.url));
const fixture = JSON.parse(readFileSync(fixturePath, "utf-8")) as Record<Role, string[]>;

const ROLES: Role[] = ["Regular", "Admin", "Superuser"];

describe("capability equivalence with the service authorize predicate", () => {
  for (const role of ROLES) {
    it(`${role} sessions render exactly the allow set`, () => {
      const rendered = [...capabilitiesForRole(role)].sort();
      expect(rendered).toEqual([...fixture[role]].sort());
    });
  }

  it("regular sessions have no hidden admin controls", () => {
    const regular = capabilitiesForRole("Regular");
    for (const action of ["approve", "block", "unblock", "manage_firewall", "manage_institutions"]) {
      expect(regular.has(action as never)).toBe(false);
    }
  });
});

describe("role-gated route areas", () => {
  it("regular users only get my-devices", () => {
    expect(routeAreasForRole("Regular")).toEqual(["my-devices"]);
  });

  it("admins get the campus area", () => {
    expect(routeAreasForRole("Admin")).toEqual(["my-devices", "campus-admin"]);
  });

  it("superusers additionally scope institutions", () => {
    expect(routeAreasForRole("Superuser")).toEqual(["my-devices", "campus-admin", "institutions"]);
  });

  it("guard redirects regular users away from admin routes", () => {
    expect(guardRoute("campus-admin", "Regular")).toBe("my-devices");
    expect(guardRoute("institutions", "Admin")).toBe("my-devices");
    expect(guardRoute("campus-admin", "Admin")).toBe("campus-admin");
  });
});
