// Role-derived capability sets. The rendered controls are exactly this set:
// the console never draws a control the API would deny, and the fixture test
// keeps these sets equal to the service's authorization predicate.

import type { Role } from "./types.js";

export const ACTIONS = [
  "read_device",
  "write_device",
  "approve",
  "block",
  "unblock",
  "read_incidents",
  "manage_institutions",
  "manage_firewall",
] as const;

export type Action = (typeof ACTIONS)[number];

const REGULAR: readonly Action[] = ["read_device", "write_device"];
const ADMIN: readonly Action[] = [
  "read_device",
  "write_device",
  "approve",
  "block",
  "unblock",
  "read_incidents",
  "manage_firewall",
];
const SUPERUSER: readonly Action[] = [...ADMIN, "manage_institutions"];

export function capabilitiesForRole(role: Role): Set<Action> {
  switch (role) {
    case "Regular":
      return new Set(REGULAR);
    case "Admin":
      return new Set(ADMIN);
    case "Superuser":
      return new Set(SUPERUSER);
  }
}

// Route areas gated by role claims: regular users manage their own devices,
// admins run the campus view, superusers additionally scope institutions.
export type RouteArea = "my-devices" | "campus-admin" | "institutions";

export function routeAreasForRole(role: Role): RouteArea[] {
  const areas: RouteArea[] = ["my-devices"];
  if (role === "Admin" || role === "Superuser") areas.push("campus-admin");
  if (role === "Superuser") areas.push("institutions");
  return areas;
}

export function guardRoute(requested: RouteArea, role: Role): RouteArea {
  return routeAreasForRole(role).includes(requested) ? requested : "my-devices";
}
