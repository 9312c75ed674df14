// Typed client for the service API. Every console action goes through here;
// nothing in the console touches firewall or storage state directly.

import type { DeviceDoc, FeedbackDoc, IncidentDoc, TokenResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;

  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `cannot reach API: ${String(err)}`);
    }
    if (!response.ok) {
      let code = "api_error";
      let message = `${response.status}`;
      try {
        const doc = (await response.json()) as { code?: string; message?: string };
        code = doc.code ?? code;
        message = doc.message ?? message;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  async login(username: string, password: string): Promise<TokenResponse> {
    const doc = await this.request<TokenResponse>("POST", "/auth/token", { username, password });
    this.setToken(doc.token);
    return doc;
  }

  async listDevices(): Promise<DeviceDoc[]> {
    const doc = await this.request<{ devices: DeviceDoc[] }>("GET", "/devices");
    return doc.devices;
  }

  async requestDevice(mac: string, name: string, requestedIp?: string): Promise<DeviceDoc> {
    return this.request<DeviceDoc>("POST", "/devices", {
      mac,
      name,
      requested_ip: requestedIp ?? null,
    });
  }

  async approveDevice(deviceId: string, ip?: string): Promise<DeviceDoc> {
    return this.request<DeviceDoc>("POST", `/devices/${deviceId}/approve`, { ip: ip ?? null });
  }

  async blockDevice(deviceId: string, reason: string): Promise<DeviceDoc> {
    return this.request<DeviceDoc>("POST", `/devices/${deviceId}/block`, { reason });
  }

  async unblockDevice(deviceId: string): Promise<DeviceDoc> {
    return this.request<DeviceDoc>("POST", `/devices/${deviceId}/unblock`);
  }

  async listIncidents(cursor?: string | null): Promise<{ incidents: IncidentDoc[]; cursor: string | null }> {
    const qs = cursor ? `?cursor=${encodeURIComponent(cursor)}` : "";
    return this.request("GET", `/incidents${qs}`);
  }

  async listFeedback(): Promise<FeedbackDoc[]> {
    const doc = await this.request<{ feedback: FeedbackDoc[] }>("GET", "/feedback");
    return doc.feedback;
  }

  async firewallState(institutionId?: string): Promise<unknown> {
    const qs = institutionId ? `?institution_id=${encodeURIComponent(institutionId)}` : "";
    return this.request("GET", `/firewall/state${qs}`);
  }

  async syncFirewall(institutionId?: string): Promise<unknown> {
    return this.request("POST", "/firewall/sync", institutionId ? { institution_id: institutionId } : {});
  }
}
