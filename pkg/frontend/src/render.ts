// Pure view functions: ConsoleState in, HTML strings out.
//
// Buttons carry data-alert / data-action attributes; main.ts wires them via
// event delegation. Keeping these as plain string builders lets the node
// test suite assert on views without a DOM.

import { AlertPayload, isResolved } from "./protocol.js";
import { ConsoleState } from "./store.js";

function esc(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const MODE_LABEL: Record<string, string> = {
  takeoff: "Takeoff",
  search: "Search",
  track: "Track",
  provisional_track: "Provisional track",
  awaiting_operator: "Awaiting operator",
};

export function lossReasonText(alert: AlertPayload): string {
  const v = alert.verdict;
  const parts: string[] = [];
  if (v.reasons.includes("uncertainty_above_threshold")) {
    parts.push(`uncertainty above threshold (u=${v.u.toFixed(3)})`);
  }
  if (v.reasons.includes("coverage_below_threshold")) {
    const context = Object.entries(alert.detection.observed_covariates)
      .map(([k, val]) => `${k}=${val}`)
      .join(", ");
    parts.push(
      v.coverage_supported
        ? `covariate coverage below threshold (score ${v.coverage_score.toFixed(2)})`
        : `covariate coverage below threshold (${context} unsupported)`,
    );
  }
  return parts.length ? parts.join("; ") : "reliability intact";
}

export function renderAgentBadge(state: ConsoleState, agentId: string): string {
  const agent = state.agents[agentId];
  if (!agent) return "";
  const mode = agent.mode;
  return `<div class="agent-badge mode-${esc(mode)}" data-agent="${esc(agentId)}">
    <span class="agent-id">${esc(agentId)}</span>
    <span class="agent-mode">${esc(MODE_LABEL[mode] ?? mode)}</span>
    <span class="agent-autonomy">${esc(agent.autonomy)} autonomy</span>
  </div>`;
}

export function renderInbox(state: ConsoleState): string {
  if (state.inbox.length === 0) {
    return `<div class="inbox-empty">No open alerts</div>`;
  }
  const rows = state.inbox.map((alertId) => {
    const alert = state.alerts[alertId];
    const selected = state.selectedAlert === alertId ? " selected" : "";
    const flight = alertId in state.inFlight ? " in-flight" : "";
    return `<div class="inbox-row priority-${esc(alert.priority)}${selected}${flight}" data-alert="${esc(alertId)}">
      <span class="chip">${esc(alert.priority)}</span>
      <span>${esc(alert.agent_id)}</span>
      <span>cs ${alert.detection.confidence.toFixed(2)}</span>
      <span>t${alert.tick_raised}</span>
      <span class="status">${esc(alert.status)}</span>
    </div>`;
  });
  return rows.join("\n");
}

export function renderAlertReview(state: ConsoleState, alert: AlertPayload): string {
  const resolved = isResolved(alert.status);
  const inFlight = alert.alert_id in state.inFlight;
  const disabled = resolved || inFlight ? " disabled" : "";
  const v = alert.verdict;
  const covariates = Object.entries(alert.detection.observed_covariates)
    .map(([k, val]) => `<span class="cov">${esc(k)}=${esc(val)}</span>`)
    .join(" ");

  const banner = alert.status === "provisional"
    ? `<div class="banner provisional">Agent acting on best judgment pending review</div>`
    : "";
  const stale = resolved
    ? `<div class="banner resolved">Resolved: ${esc(alert.status)} (read-only)</div>`
    : "";
  const flight = inFlight
    ? `<div class="banner flight">Command in flight: ${esc(state.inFlight[alert.alert_id])}</div>`
    : "";

  const buttons = `<div class="actions">
    <button data-alert="${esc(alert.alert_id)}" data-action="confirm"${disabled}>Confirm</button>
    <button data-alert="${esc(alert.alert_id)}" data-action="reject"${disabled}>Reject</button>
    <button data-alert="${esc(alert.alert_id)}" data-action="request_more_imagery"${disabled}>Request more imagery</button>
  </div>`;

  return `<div class="review priority-${esc(alert.priority)}">
    <h3>${esc(alert.alert_id)} &mdash; ${esc(alert.agent_id)} (${esc(alert.priority)} priority)</h3>
    ${banner}${stale}${flight}
    <dl>
      <dt>Confidence</dt><dd>${alert.detection.confidence.toFixed(2)}</dd>
      <dt>Uncertainty band</dt><dd>${esc(v.band)} (u=${v.u.toFixed(3)})</dd>
      <dt>Coverage score</dt><dd>${v.coverage_score.toFixed(2)}${v.coverage_supported ? "" : " (unsupported context)"}</dd>
      <dt>Loss of reliability</dt><dd>${v.loss_of_reliability ? "YES" : "no"} &mdash; ${esc(lossReasonText(alert))}</dd>
      <dt>Object</dt><dd>${esc(alert.detection.object_ref)} at [${alert.detection.position.map((c) => c.toFixed(0)).join(", ")}], tick ${alert.tick_raised}</dd>
      <dt>Context</dt><dd>${covariates}</dd>
    </dl>
    ${buttons}
  </div>`;
}

export function renderMap(state: ConsoleState): string {
  if (!state.area) return `<svg class="map" viewBox="0 0 10 10"></svg>`;
  const { width, height } = state.area;
  const agents = state.agentOrder.map((agentId) => {
    const agent = state.agents[agentId];
    if (!agent) return "";
    const [x, y] = agent.position;
    return `<g class="agent mode-${esc(agent.mode)}">
      <circle cx="${x}" cy="${height - y}" r="${Math.max(width, height) / 60}"></circle>
      <text x="${x}" y="${height - y - Math.max(width, height) / 45}">${esc(agentId)}</text>
    </g>`;
  });
  // victim markers appear only once an alert was confirmed
  const victims = Object.entries(state.confirmedVictims).map(([ref, [x, y]]) =>
    `<g class="victim"><path d="M ${x - 3} ${height - y} l 3 -5 l 3 5 z"></path>
      <title>${esc(ref)}</title></g>`,
  );
  return `<svg class="map" viewBox="-2 -2 ${width + 4} ${height + 4}" preserveAspectRatio="xMidYMid meet">
    <rect class="area" x="0" y="0" width="${width}" height="${height}"></rect>
    ${victims.join("\n")}
    ${agents.join("\n")}
  </svg>`;
}

export function renderApp(state: ConsoleState): string {
  const selected = state.selectedAlert ? state.alerts[state.selectedAlert] : undefined;
  const review = selected
    ? renderAlertReview(state, selected)
    : `<div class="review-empty">Select an alert to review</div>`;
  const notice = state.notice ? `<div class="notice">${esc(state.notice)}</div>` : "";
  return `
  <header>
    <span class="conn conn-${esc(state.connection)}">${esc(state.connection)}</span>
    <span>tick ${state.tick}</span>
    <span>seq ${state.lastSeq}</span>
    ${state.finished ? "<span>mission complete</span>" : ""}
    ${state.protocol ? `<span class="proto">${esc(state.protocol)}</span>` : ""}
  </header>
  ${notice}
  <main>
    <section class="map-panel">${renderMap(state)}</section>
    <section class="side">
      <h2>Agents</h2>
      <div class="agents">${state.agentOrder.map((a) => renderAgentBadge(state, a)).join("\n")}</div>
      <h2>Alert inbox</h2>
      <div class="inbox">${renderInbox(state)}</div>
      <h2>Review</h2>
      ${review}
    </section>
  </main>`;
}
