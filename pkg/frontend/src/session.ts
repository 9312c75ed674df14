// Console session: the bearer token plus everything the UI derives from it.

import { capabilitiesForRole, guardRoute, routeAreasForRole, type Action, type RouteArea } from "./capabilities.js";
import type { Role, TokenResponse } from "./types.js";

export interface TokenClaims {
  sub: string;
  role: Role;
  insts: string[];
  iat: number;
  exp: number;
}

export function decodeTokenClaims(tokenText: string): TokenClaims {
  const payload = tokenText.split(".")[0];
  if (!payload) throw new Error("malformed token");
  const padded = payload.replace(/-/g, "+").replace(/_/g, "/");
  const json = typeof atob === "function" ? atob(padded) : Buffer.from(padded, "base64").toString("utf-8");
  return JSON.parse(json) as TokenClaims;
}

export class ConsoleSession {
  readonly capabilities: Set<Action>;
  readonly routeAreas: RouteArea[];
  activeInstitution: string;

  constructor(
    readonly token: string,
    readonly subject: string,
    readonly role: Role,
    readonly institutions: string[],
  ) {
    this.capabilities = capabilitiesForRole(role);
    this.routeAreas = routeAreasForRole(role);
    this.activeInstitution = institutions[0] ?? "";
  }

  static fromTokenResponse(doc: TokenResponse): ConsoleSession {
    return new ConsoleSession(doc.token, doc.subject, doc.role, doc.institutions);
  }

  static fromTokenText(tokenText: string): ConsoleSession {
    const claims = decodeTokenClaims(tokenText);
    return new ConsoleSession(tokenText, claims.sub, claims.role, claims.insts);
  }

  can(action: Action): boolean {
    return this.capabilities.has(action);
  }

  guard(requested: RouteArea): RouteArea {
    return guardRoute(requested, this.role);
  }

  // Only superusers scope across institutions; others are pinned.
  selectInstitution(institutionId: string): void {
    if (this.role !== "Superuser") return;
    if (this.institutions.includes(institutionId)) {
      this.activeInstitution = institutionId;
    }
  }
}
