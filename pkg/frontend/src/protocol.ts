// Wire types for the gateway NDJSON protocol ("hotl/1", see ../PROTOCOL.md).

export type EnvelopeKind =
  | "snapshot"
  | "agent_state"
  | "detection"
  | "reliability"
  | "alert"
  | "decision"
  | "operator_command"
  | "heartbeat";

export interface Envelope {
  seq: number;
  tick: number;
  kind: EnvelopeKind;
  payload: any;
}

export type AgentMode =
  | "takeoff"
  | "search"
  | "track"
  | "provisional_track"
  | "awaiting_operator";

export interface AgentStatePayload {
  agent_id: string;
  mode: AgentMode;
  autonomy: "full" | "reduced";
  position: [number, number];
  pending_alert_id: string | null;
  target_lock: { object_ref: string; position: [number, number] } | null;
  loiter_target: [number, number] | null;
  cause: string;
}

export type AlertPriority = "high" | "low";
export type AlertStatus =
  | "pending"
  | "provisional"
  | "confirmed"
  | "rejected"
  | "more_imagery_requested"
  | "superseded";

export interface AlertPayload {
  alert_id: string;
  agent_id: string;
  priority: AlertPriority;
  status: AlertStatus;
  tick_raised: number;
  detection: {
    object_ref: string;
    confidence: number;
    observed_covariates: Record<string, string | number>;
    position: [number, number];
  };
  verdict: {
    u: number;
    band: "confident" | "uncertain" | "no_confidence";
    coverage_score: number;
    coverage_supported: boolean;
    loss_of_reliability: boolean;
    reasons: string[];
  };
}

export type CommandAction = "confirm" | "reject" | "request_more_imagery";

export interface CommandAck {
  ok: true;
  alert_id: string;
  action: CommandAction;
  seq: number;
  effective_tick: number;
}

export interface CommandError {
  code: string;
  message: string;
}

export const RESOLVED_STATUSES: ReadonlySet<AlertStatus> = new Set([
  "confirmed",
  "rejected",
  "more_imagery_requested",
  "superseded",
]);

export function isResolved(status: AlertStatus): boolean {
  return RESOLVED_STATUSES.has(status);
}

export function parseEnvelope(line: string): Envelope {
  const data = JSON.parse(line);
  if (
    typeof data.seq !== "number" ||
    typeof data.tick !== "number" ||
    typeof data.kind !== "string"
  ) {
    throw new Error(`malformed envelope: ${line.slice(0, 120)}`);
  }
  return data as Envelope;
}
