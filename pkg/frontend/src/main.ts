// Console shell: login, role-gated navigation, and the three route areas.

import { ApiClient, ApiError } from "./api.js";
import type { RouteArea } from "./capabilities.js";
import { PendingDevicesView } from "./devices.js";
import { IncidentFeed } from "./feed.js";
import { clear, deviceRow, el, incidentRowElement, pendingRowElement, staleBanner } from "./render.js";
import { ConsoleSession } from "./session.js";

const POLL_INTERVAL_MS = 2000;

interface AppState {
  api: ApiClient;
  session: ConsoleSession | null;
  route: RouteArea;
  feed: IncidentFeed | null;
  pending: PendingDevicesView | null;
}

const state: AppState = {
  api: new ApiClient(localStorage.getItem("iotsentry.endpoint") ?? ""),
  session: null,
  route: "my-devices",
  feed: null,
  pending: null,
};

function root(): HTMLElement {
  return document.getElementById("app") as HTMLElement;
}

function statusLine(text: string, kind = "info"): HTMLElement {
  return el("div", { class: `status ${kind}` }, [text]);
}

// --- login ------------------------------------------------------------------

function renderLogin(message?: string): void {
  const endpoint = el("input", {
    type: "text",
    value: state.api.baseUrl || "http://127.0.0.1:8080",
    class: "endpoint",
  }) as HTMLInputElement;
  const username = el("input", { type: "text", placeholder: "username" }) as HTMLInputElement;
  const password = el("input", { type: "password", placeholder: "password" }) as HTMLInputElement;
  const submit = el("button", {}, ["Sign in"]) as HTMLButtonElement;
  submit.addEventListener("click", () => {
    void (async () => {
      state.api = new ApiClient(endpoint.value.replace(/\/$/, ""));
      localStorage.setItem("iotsentry.endpoint", state.api.baseUrl);
      try {
        const token = await state.api.login(username.value, password.value);
        state.session = ConsoleSession.fromTokenResponse(token);
        state.route = state.session.guard(state.session.role === "Regular" ? "my-devices" : "campus-admin");
        renderApp();
      } catch (err) {
        renderLogin(err instanceof ApiError ? err.message : String(err));
      }
    })();
  });
  const node = root();
  clear(node);
  node.append(
    el("div", { class: "login" }, [
      el("h1", {}, ["iotsentry console"]),
      message ? statusLine(message, "error") : el("div", {}),
      el("label", {}, ["API endpoint", endpoint]),
      el("label", {}, ["Username", username]),
      el("label", {}, ["Password", password]),
      submit,
    ]),
  );
}

// --- navigation ----------------------------------------------------------------

function renderNav(): HTMLElement {
  const session = state.session as ConsoleSession;
  const links = session.routeAreas.map((area) => {
    const link = el("button", { class: area === state.route ? "nav active" : "nav" }, [area]);
    link.addEventListener("click", () => {
      state.route = session.guard(area);
      renderApp();
    });
    return link;
  });
  const who = el("span", { class: "who" }, [`${session.subject} (${session.role})`]);
  return el("nav", {}, [...links, who]);
}

// --- my devices -------------------------------------------------------------------

async function renderMyDevices(container: HTMLElement): Promise<void> {
  const session = state.session as ConsoleSession;
  const mac = el("input", { type: "text", placeholder: "aa:bb:cc:dd:ee:ff" }) as HTMLInputElement;
  const name = el("input", { type: "text", placeholder: "device name" }) as HTMLInputElement;
  const request = el("button", {}, ["Request access"]) as HTMLButtonElement;
  const message = el("div", { class: "status" });
  if (!session.can("write_device")) request.disabled = true;
  const table = el("table", { class: "devices" });

  async function refresh(): Promise<void> {
    const devices = await state.api.listDevices();
    clear(table);
    table.append(
      el("tr", {}, [
        el("th", {}, ["Name"]),
        el("th", {}, ["MAC"]),
        el("th", {}, ["IP"]),
        el("th", {}, ["State"]),
        el("th", {}, [""]),
      ]),
      ...devices.map((d) => deviceRow(d, [])),
    );
  }

  request.addEventListener("click", () => {
    void (async () => {
      try {
        await state.api.requestDevice(mac.value.trim(), name.value.trim());
        message.textContent = "request submitted - awaiting approval";
        await refresh();
      } catch (err) {
        message.textContent = err instanceof ApiError ? err.message : String(err);
      }
    })();
  });

  container.append(
    el("h2", {}, ["My devices"]),
    el("div", { class: "request-form" }, [mac, name, request]),
    message,
    table,
  );
  await refresh();
}

// --- campus admin --------------------------------------------------------------------

async function renderCampusAdmin(container: HTMLElement): Promise<void> {
  const session = state.session as ConsoleSession;
  container.append(el("h2", {}, ["Campus administration"]));

  // pending approvals
  const pendingTable = el("table", { class: "pending" });
  container.append(el("h3", {}, ["Pending devices"]), pendingTable);
  const pending = new PendingDevicesView(state.api);
  state.pending = pending;

  function drawPending(): void {
    clear(pendingTable);
    pendingTable.append(
      el("tr", {}, [
        el("th", {}, ["Name"]),
        el("th", {}, ["MAC"]),
        el("th", {}, ["IP"]),
        el("th", {}, ["State"]),
        el("th", {}, ["Actions"]),
      ]),
      ...pending.rows.map((row) =>
        pendingRowElement(
          row,
          (deviceId, ip) => void pending.approve(deviceId, ip || undefined),
          (deviceId) => pending.deny(deviceId),
        ),
      ),
    );
  }
  pending.onChange(drawPending);
  await pending.refresh();

  // live incident feed
  const banner = staleBanner(false);
  const feedTable = el("table", { class: "incidents" });
  container.append(el("h3", {}, ["Incidents"]), banner, feedTable);
  const feed = new IncidentFeed(state.api, { pollIntervalMs: POLL_INTERVAL_MS });
  state.feed = feed;
  feed.onChange((snapshot) => {
    banner.className = snapshot.stale ? "stale-banner visible" : "stale-banner hidden";
    clear(feedTable);
    feedTable.append(
      el("tr", {}, [
        el("th", {}, ["Time"]),
        el("th", {}, ["Severity"]),
        el("th", {}, ["Notice"]),
        el("th", {}, ["Source"]),
        el("th", {}, ["Status"]),
        el("th", {}, [""]),
      ]),
      ...snapshot.rows.map((row) => {
        let blockButton: HTMLElement | null = null;
        if (session.can("block") && row.incident.device_id && !row.blocked && row.deviceState === "Active") {
          const button = el("button", { class: "block" }, ["Block device"]) as HTMLButtonElement;
          button.addEventListener("click", () => {
            void state.api
              .blockDevice(row.incident.device_id as string, `manual block from incident ${row.incident.incident_id}`)
              .then(() => feed.pollOnce());
          });
          blockButton = button;
        }
        return incidentRowElement(row, blockButton);
      }),
    );
  });
  feed.start();
}

// --- institutions (superuser) -----------------------------------------------------------

function renderInstitutions(container: HTMLElement): void {
  const session = state.session as ConsoleSession;
  container.append(el("h2", {}, ["Institutions"]));
  const list = el("ul", { class: "institutions" });
  for (const inst of session.institutions) {
    const pick = el("button", {}, [inst === session.activeInstitution ? `${inst} (active)` : inst]);
    pick.addEventListener("click", () => {
      session.selectInstitution(inst);
      renderApp();
    });
    list.append(el("li", {}, [pick]));
  }
  container.append(list);
  const sync = el("button", {}, ["Reconcile firewall now"]) as HTMLButtonElement;
  sync.addEventListener("click", () => {
    void state.api.syncFirewall(session.activeInstitution);
  });
  container.append(sync);
}

// --- shell ----------------------------------------------------------------------------------

function renderApp(): void {
  const session = state.session;
  if (!session) {
    renderLogin();
    return;
  }
  state.feed?.stop();
  const node = root();
  clear(node);
  node.append(renderNav());
  const container = el("main", {});
  node.append(container);
  const route = session.guard(state.route);
  if (route === "my-devices") void renderMyDevices(container);
  else if (route === "campus-admin") void renderCampusAdmin(container);
  else renderInstitutions(container);
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => renderApp());
}
