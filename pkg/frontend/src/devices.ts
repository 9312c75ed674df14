// Pending-device approval queue: optimistic row updates reconciled against
// the API response, with IP-collision conflicts reopening the picker inline.

import { ApiError } from "./api.js";
import type { DeviceDoc } from "./types.js";

export interface DevicesApi {
  listDevices(): Promise<DeviceDoc[]>;
  approveDevice(deviceId: string, ip?: string): Promise<DeviceDoc>;
}

export interface PendingRow {
  device: DeviceDoc;
  busy: boolean;
  pickerOpen: boolean;
  conflictMessage: string | null;
  errorMessage: string | null;
}

export class PendingDevicesView {
  rows: PendingRow[] = [];
  private dismissed = new Set<string>();
  private listeners: Array<() => void> = [];

  constructor(private api: DevicesApi) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async refresh(): Promise<void> {
    const devices = await this.api.listDevices();
    const previous = new Map(this.rows.map((r) => [r.device.device_id, r]));
    this.rows = devices
      .filter((d) => d.state === "Pending" && !this.dismissed.has(d.device_id))
      .map((device) => ({
        device,
        busy: false,
        pickerOpen: previous.get(device.device_id)?.pickerOpen ?? false,
        conflictMessage: previous.get(device.device_id)?.conflictMessage ?? null,
        errorMessage: null,
      }));
    this.notify();
  }

  row(deviceId: string): PendingRow | undefined {
    return this.rows.find((r) => r.device.device_id === deviceId);
  }

  // Deny hides the request from this console's queue. The API exposes no
  // deny route, so the request simply stays unapproved server-side.
  deny(deviceId: string): void {
    this.dismissed.add(deviceId);
    this.rows = this.rows.filter((r) => r.device.device_id !== deviceId);
    this.notify();
  }

  // Empty ip means "let the pool suggest one" (server-side auto-assignment).
  async approve(deviceId: string, ip?: string): Promise<DeviceDoc | null> {
    const row = this.row(deviceId);
    if (!row) return null;
    row.busy = true;
    row.conflictMessage = null;
    row.errorMessage = null;
    // optimistic: the row leaves the pending list immediately...
    this.rows = this.rows.filter((r) => r.device.device_id !== deviceId);
    this.notify();
    try {
      const approved = await this.api.approveDevice(deviceId, ip || undefined);
      this.notify();
      return approved;
    } catch (err) {
      // ...and comes back on failure, reconciled with the error.
      row.busy = false;
      if (err instanceof ApiError && err.code === "ip_collision") {
        row.pickerOpen = true;
        row.conflictMessage = err.message;
      } else if (err instanceof ApiError && err.status === 403) {
        row.errorMessage = "your session lacks the approve capability";
      } else if (err instanceof ApiError) {
        row.errorMessage = err.message;
      } else {
        row.errorMessage = String(err);
      }
      this.rows = [...this.rows, row].sort((a, b) => a.device.created_at - b.device.created_at);
      this.notify();
      return null;
    }
  }
}
