// DOM helpers for the console shell. All state lives in the view models;
// this layer only draws.

import type { IncidentRow } from "./feed.js";
import type { PendingRow } from "./devices.js";
import type { DeviceDoc } from "./types.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<HTMLElement | string> = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function deviceRow(device: DeviceDoc, actions: HTMLElement[]): HTMLElement {
  return el("tr", { class: `device state-${device.state.toLowerCase()}` }, [
    el("td", {}, [device.name || device.device_id.slice(0, 8)]),
    el("td", {}, [device.mac]),
    el("td", {}, [device.ip ?? "-"]),
    el("td", {}, [el("span", { class: `badge badge-${device.state.toLowerCase()}` }, [device.state])]),
    el("td", {}, actions),
  ]);
}

export function pendingRowElement(
  row: PendingRow,
  onApprove: (deviceId: string, ip: string) => void,
  onDeny: (deviceId: string) => void,
): HTMLElement {
  const picker = el("input", {
    type: "text",
    class: "ip-picker",
    placeholder: "auto from pool",
    value: "",
  }) as HTMLInputElement;
  const approve = el("button", { class: "approve" }, ["Approve"]) as HTMLButtonElement;
  approve.disabled = row.busy;
  approve.addEventListener("click", () => onApprove(row.device.device_id, picker.value.trim()));
  const deny = el("button", { class: "deny" }, ["Deny"]) as HTMLButtonElement;
  deny.addEventListener("click", () => onDeny(row.device.device_id));
  const cells: Array<HTMLElement | string> = [picker, approve, deny];
  if (row.conflictMessage) {
    cells.push(el("span", { class: "conflict" }, [row.conflictMessage]));
  }
  if (row.errorMessage) {
    cells.push(el("span", { class: "error" }, [row.errorMessage]));
  }
  return deviceRow(row.device, [el("div", { class: "pending-controls" }, cells)]);
}

export function incidentRowElement(row: IncidentRow, blockButton: HTMLElement | null): HTMLElement {
  const classes = ["incident", `severity-${row.incident.severity}`];
  if (row.critical) classes.push("critical");
  const badges: HTMLElement[] = [];
  if (row.blocked) {
    badges.push(el("span", { class: "badge badge-blocked" }, ["Blocked"]));
  }
  if (row.autoBlocked && row.ttbSeconds !== null) {
    const ttd = row.ttdSeconds !== null ? `TtD ${row.ttdSeconds.toFixed(1)}s ` : "";
    badges.push(el("span", { class: "timing" }, [`${ttd}TtB ${row.ttbSeconds.toFixed(1)}s`]));
  }
  const cells: Array<HTMLElement | string> = [
    el("td", {}, [new Date(row.incident.ts * 1000).toISOString()]),
    el("td", {}, [el("span", { class: `sev sev-${row.incident.severity}` }, [row.incident.severity])]),
    el("td", {}, [row.incident.note]),
    el("td", {}, [row.incident.src_ip]),
    el("td", {}, [row.incident.status, ...badges]),
    el("td", {}, blockButton ? [blockButton] : []),
  ];
  return el("tr", { class: classes.join(" ") }, cells);
}

export function staleBanner(visible: boolean): HTMLElement {
  return el(
    "div",
    { class: visible ? "stale-banner visible" : "stale-banner hidden" },
    ["Live data unavailable - showing the last loaded incidents"],
  );
}
