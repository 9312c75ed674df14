// Live incident feed: cursor-based polling with severity ordering, blocked
// badges, inline block timing for auto-blocked incidents, and a stale-data
// banner on poll failures. The cursor is monotone: an incident acknowledged
// once is updated in place, never re-rendered as new.

import { SEVERITY_ORDER, type DeviceDoc, type FeedbackDoc, type IncidentDoc } from "./types.js";

export interface FeedApi {
  listIncidents(cursor?: string | null): Promise<{ incidents: IncidentDoc[]; cursor: string | null }>;
  listDevices(): Promise<DeviceDoc[]>;
  listFeedback(): Promise<FeedbackDoc[]>;
}

export interface IncidentRow {
  incident: IncidentDoc;
  isNew: boolean;
  critical: boolean;
  blocked: boolean;
  autoBlocked: boolean;
  deviceState: string | null;
  ttdSeconds: number | null;
  ttbSeconds: number | null;
}

export interface FeedSnapshot {
  rows: IncidentRow[];
  stale: boolean;
  cursor: string | null;
}

function buildRow(
  incident: IncidentDoc,
  isNew: boolean,
  devicesById: Map<string, DeviceDoc>,
  feedbackByIncident: Map<string, FeedbackDoc>,
): IncidentRow {
  const device = incident.device_id ? devicesById.get(incident.device_id) : undefined;
  const feedback = feedbackByIncident.get(incident.incident_id);
  const ttd =
    feedback && feedback.t_attack_start !== null ? feedback.t_notice - feedback.t_attack_start : null;
  const ttb = feedback && feedback.t_commit !== null ? feedback.t_commit - feedback.t_decision : null;
  return {
    incident,
    isNew,
    critical: incident.severity === "critical",
    blocked: device?.state === "Blocked",
    autoBlocked: incident.status === "Actioned" && feedback !== undefined,
    deviceState: device?.state ?? null,
    ttdSeconds: ttd,
    ttbSeconds: ttb,
  };
}

export class IncidentFeed {
  readonly pollIntervalMs: number;
  private cursor: string | null = null;
  private known = new Map<string, IncidentDoc>();
  private acknowledged = new Set<string>();
  private stale = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private listeners: Array<(snapshot: FeedSnapshot) => void> = [];

  constructor(
    private api: FeedApi,
    options: { pollIntervalMs?: number; cursor?: string | null } = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.cursor = options.cursor ?? null;
  }

  onChange(listener: (snapshot: FeedSnapshot) => void): void {
    this.listeners.push(listener);
  }

  get currentCursor(): string | null {
    return this.cursor;
  }

  acknowledgeAll(): void {
    for (const id of this.known.keys()) this.acknowledged.add(id);
  }

  async pollOnce(): Promise<FeedSnapshot> {
    let snapshot: FeedSnapshot;
    try {
      const page = await this.api.listIncidents(this.cursor);
      for (const incident of page.incidents) {
        this.known.set(incident.incident_id, incident);
      }
      if (page.cursor) this.cursor = page.cursor;
      const [devices, feedback] = await Promise.all([this.api.listDevices(), this.api.listFeedback()]);
      const devicesById = new Map(devices.map((d) => [d.device_id, d]));
      const feedbackByIncident = new Map(
        feedback.filter((f) => f.incident_id !== null).map((f) => [f.incident_id as string, f]),
      );
      const rows = [...this.known.values()]
        .map((incident) =>
          buildRow(incident, !this.acknowledged.has(incident.incident_id), devicesById, feedbackByIncident),
        )
        .sort(
          (a, b) =>
            SEVERITY_ORDER[b.incident.severity] - SEVERITY_ORDER[a.incident.severity] ||
            b.incident.created_at - a.incident.created_at,
        );
      this.stale = false;
      snapshot = { rows, stale: false, cursor: this.cursor };
    } catch {
      // Poll failures surface as an explicit stale banner; the last known
      // rows stay visible rather than silently aging.
      this.stale = true;
      snapshot = { rows: this.lastRowsStale(), stale: true, cursor: this.cursor };
    }
    for (const listener of this.listeners) listener(snapshot);
    return snapshot;
  }

  private lastRowsStale(): IncidentRow[] {
    return [...this.known.values()]
      .map((incident) =>
        buildRow(incident, !this.acknowledged.has(incident.incident_id), new Map(), new Map()),
      )
      .sort(
        (a, b) =>
          SEVERITY_ORDER[b.incident.severity] - SEVERITY_ORDER[a.incident.severity] ||
          b.incident.created_at - a.incident.created_at,
      );
  }

  start(): void {
    if (this.timer !== null) return;
    void this.pollOnce();
    this.timer = setInterval(() => void this.pollOnce(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
