// Wire documents served by the backing API.

export type Role = "Regular" | "Admin" | "Superuser";

export type DeviceState = "Pending" | "Approved" | "Active" | "Blocked" | "Revoked";

export interface DeviceDoc {
  device_id: string;
  mac: string;
  ip: string | null;
  owner_id: string;
  institution_id: string;
  state: DeviceState;
  name: string;
  pending_op: string | null;
  created_at: number;
  updated_at: number;
  feedback_id?: string;
}

export type SeverityName = "info" | "low" | "medium" | "high" | "critical";

export interface IncidentDoc {
  incident_id: string;
  ts: number;
  src_ip: string;
  dst_ip: string | null;
  uid: string | null;
  note: string;
  msg: string;
  severity: SeverityName;
  device_id: string | null;
  institution_id: string | null;
  status: "New" | "Validated" | "Actioned" | "Dismissed";
  created_at: number;
}

export interface FeedbackDoc {
  feedback_id: string;
  device_id: string;
  incident_id: string | null;
  t_attack_start: number | null;
  t_notice: number;
  t_decision: number;
  t_commit: number | null;
  t_loss_of_access: number | null;
  unblocked_at: number | null;
}

export interface TokenResponse {
  token: string;
  subject: string;
  role: Role;
  institutions: string[];
  expires_at: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export const SEVERITY_ORDER: Record<SeverityName, number> = {
  info: 0,
  low: 1,
  medium: 2,
  high: 3,
  critical: 4,
};
