// Single-writer console state, derived entirely from gateway envelopes.
//
// The console never mutates mission state locally: commands only set an
// optimistic "in flight" flag; everything rendered comes from envelopes.
// Seq gaps flip needsResync so the client restarts from the snapshot.

import {
  AgentStatePayload,
  AlertPayload,
  CommandAction,
  Envelope,
  isResolved,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "live" | "resync" | "closed";

export interface ConsoleState {
  protocol: string | null;
  connection: ConnectionStatus;
  lastSeq: number;
  tick: number;
  finished: boolean;
  area: { width: number; height: number } | null;
  agents: Record<string, AgentStatePayload>;
  agentOrder: string[];
  alerts: Record<string, AlertPayload>;
  inbox: string[];
  selectedAlert: string | null;
  inFlight: Record<string, CommandAction>;
  confirmedVictims: Record<string, [number, number]>;
  notice: string | null;
  needsResync: boolean;
}

export function initialState(): ConsoleState {
  return {
    protocol: null,
    connection: "connecting",
    lastSeq: 0,
    tick: 0,
    finished: false,
    area: null,
    agents: {},
    agentOrder: [],
    alerts: {},
    inbox: [],
    selectedAlert: null,
    inFlight: {},
    confirmedVictims: {},
    notice: null,
    needsResync: false,
  };
}

const PRIORITY_RANK: Record<string, number> = { high: 0, low: 1 };

// Mirrors the gateway's queue order: high before low, then raise tick, then agent id.
export function inboxCompare(a: AlertPayload, b: AlertPayload): number {
  const byPriority = PRIORITY_RANK[a.priority] - PRIORITY_RANK[b.priority];
  if (byPriority !== 0) return byPriority;
  if (a.tick_raised !== b.tick_raised) return a.tick_raised - b.tick_raised;
  return a.agent_id < b.agent_id ? -1 : a.agent_id > b.agent_id ? 1 : 0;
}

function computeInbox(alerts: Record<string, AlertPayload>): string[] {
  return Object.values(alerts)
    .filter((a) => !isResolved(a.status))
    .sort(inboxCompare)
    .map((a) => a.alert_id);
}

export function applyEnvelope(state: ConsoleState, env: Envelope): ConsoleState {
  if (env.seq <= state.lastSeq) {
    return state; // duplicate on reconnect; already applied
  }
  if (env.seq !== state.lastSeq + 1 && env.kind !== "snapshot") {
    return { ...state, needsResync: true, connection: "resync" };
  }

  const next: ConsoleState = { ...state, lastSeq: env.seq, tick: env.tick };

  switch (env.kind) {
    case "snapshot": {
      const scenario = env.payload.scenario ?? {};
      next.protocol = env.payload.protocol ?? null;
      next.area = scenario.area ?? null;
      next.agents = {};
      next.agentOrder = [];
      for (const agent of env.payload.agents ?? []) {
        next.agents[agent.agent_id] = agent;
        next.agentOrder.push(agent.agent_id);
      }
      next.alerts = {};
      for (const alert of env.payload.alerts ?? []) {
        next.alerts[alert.alert_id] = alert;
      }
      next.inbox = computeInbox(next.alerts);
      next.confirmedVictims = {};
      next.needsResync = false;
      next.connection = "live";
      break;
    }
    case "agent_state": {
      const agent = env.payload as AgentStatePayload;
      next.agents = { ...state.agents, [agent.agent_id]: agent };
      if (!state.agentOrder.includes(agent.agent_id)) {
        next.agentOrder = [...state.agentOrder, agent.agent_id];
      }
      break;
    }
    case "alert": {
      const alert = env.payload as AlertPayload;
      next.alerts = { ...state.alerts, [alert.alert_id]: alert };
      next.inbox = computeInbox(next.alerts);
      if (isResolved(alert.status)) {
        if (alert.alert_id in state.inFlight) {
          const inFlight = { ...state.inFlight };
          delete inFlight[alert.alert_id];
          next.inFlight = inFlight;
        }
        if (alert.status === "confirmed") {
          next.confirmedVictims = {
            ...state.confirmedVictims,
            [alert.detection.object_ref]: alert.detection.position,
          };
        }
      }
      break;
    }
    case "heartbeat":
    case "detection":
    case "reliability":
    case "decision":
    case "operator_command":
      break;
  }
  return next;
}

export function selectAlert(state: ConsoleState, alertId: string | null): ConsoleState {
  return { ...state, selectedAlert: alertId };
}

export function markInFlight(state: ConsoleState, alertId: string, action: CommandAction): ConsoleState {
  return { ...state, inFlight: { ...state.inFlight, [alertId]: action }, notice: null };
}

export function clearInFlight(state: ConsoleState, alertId: string): ConsoleState {
  const inFlight = { ...state.inFlight };
  delete inFlight[alertId];
  return { ...state, inFlight };
}

export function setNotice(state: ConsoleState, notice: string | null): ConsoleState {
  return { ...state, notice };
}

export function setConnection(state: ConsoleState, connection: ConnectionStatus): ConsoleState {
  return { ...state, connection };
}

export function resetForResync(state: ConsoleState): ConsoleState {
  // keep only UI intent (selection); all mission state returns via snapshot
  const fresh = initialState();
  fresh.selectedAlert = state.selectedAlert;
  fresh.connection = "resync";
  return fresh;
}
