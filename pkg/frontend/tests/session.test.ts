import { describe, expect, it } from "vitest";

import { ConsoleSession, decodeTokenClaims } from "../src/session.js";

function fakeToken(role: string, insts: string[]): string {
  const payload = Buffer.from(
    JSON.stringify({ sub: "user-1", role, insts, iat: 1, exp: 2 }),
  ).toString("base64url");
  return `${payload}.deadbeef`;
}

describe("token claims", () => {
  it("decodes the payload segment", () => {
    const claims = decodeTokenClaims(fakeToken("Admin", ["inst-1"]));
    expect(claims.sub).toBe("user-1");
    expect(claims.role).toBe("Admin");
    expect(claims.insts).toEqual(["inst-1"]);
  });

  it("rejects malformed tokens", () => {
    expect(() => decodeTokenClaims("")).toThrow();
  });
});

describe("console session", () => {
  it("derives capabilities and routes from the role claim", () => {
    const session = ConsoleSession.fromTokenText(fakeToken("Admin", ["inst-1"]));
    expect(session.can("approve")).toBe(true);
    expect(session.can("manage_institutions")).toBe(false);
    expect(session.routeAreas).toContain("campus-admin");
  });

  it("institution selector only moves for superusers within their scope", () => {
    const admin = ConsoleSession.fromTokenText(fakeToken("Admin", ["inst-1"]));
    admin.selectInstitution("inst-2");
    expect(admin.activeInstitution).toBe("inst-1");

    const root = ConsoleSession.fromTokenText(fakeToken("Superuser", ["inst-1", "inst-2"]));
    root.selectInstitution("inst-2");
    expect(root.activeInstitution).toBe("inst-2");
    root.selectInstitution("inst-9");
    expect(root.activeInstitution).toBe("inst-2");
  });
});
