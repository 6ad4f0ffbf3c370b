// Gateway client: NDJSON stream consumption and the command endpoint.
//
// dispatchCommand enforces the one-command-in-flight-per-alert rule and
// leaves all mission state to the server: an ack only keeps the in-flight
// flag until the authoritative alert envelope lands.

import { CommandAck, CommandAction, CommandError, parseEnvelope } from "./protocol.js";
import { ConsoleState, markInFlight, clearInFlight, setNotice } from "./store.js";

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
  signal?: AbortSignal;
}) => Promise<{ status: number; json(): Promise<any>; body?: ReadableStream<Uint8Array> | null }>;

export interface StoreHandle {
  state: ConsoleState;
  update(next: ConsoleState): void;
}

export async function dispatchCommand(
  store: StoreHandle,
  base: string,
  alertId: string,
  action: CommandAction,
  fetchImpl: FetchLike,
): Promise<CommandAck | CommandError> {
  if (alertId in store.state.inFlight) {
    return { code: "IN_FLIGHT", message: `command already in flight for ${alertId}` };
  }
  store.update(markInFlight(store.state, alertId, action));
  let response: { status: number; json(): Promise<any> };
  try {
    response = await fetchImpl(`${base}/commands`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ alert_id: alertId, action }),
    });
  } catch (err) {
    store.update(setNotice(clearInFlight(store.state, alertId), `network error: ${err}`));
    return { code: "NETWORK", message: String(err) };
  }
  const body = await response.json();
  if (response.status === 200 && body.ok) {
    // stays in flight until the authoritative alert envelope arrives
    return body as CommandAck;
  }
  const error = body as CommandError;
  store.update(setNotice(
    clearInFlight(store.state, alertId),
    `${error.code}: ${error.message}`,
  ));
  return error;
}

// Async generator over NDJSON lines of a streaming response body.
export async function* ndjsonLines(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<string> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let newline;
    while ((newline = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, newline).trim();
      buffer = buffer.slice(newline + 1);
      if (line) yield line;
    }
  }
  const rest = buffer.trim();
  if (rest) yield rest;
}

export interface StreamCallbacks {
  onEnvelope(line: string): void;
  shouldResync(): boolean;
  onDrop(): void;
  onClose(): void;
}

// Consume /events, resuming from the last applied seq; a detected gap
// restarts the stream from seq 1 so the snapshot rebuilds everything.
export async function runEventLoop(
  base: string,
  callbacks: StreamCallbacks & { fromSeq(): number },
  fetchImpl: FetchLike,
  signal?: AbortSignal,
): Promise<void> {
  for (;;) {
    if (signal?.aborted) return;
    const from = callbacks.fromSeq();
    let response;
    try {
      response = await fetchImpl(`${base}/events?from=${from}`, { signal });
    } catch {
      callbacks.onDrop();
      await sleep(500);
      continue;
    }
    if (!response.body) {
      callbacks.onDrop();
      await sleep(500);
      continue;
    }
    try {
      for await (const line of ndjsonLines(response.body)) {
        callbacks.onEnvelope(line);
        if (callbacks.shouldResync()) break;
        if (signal?.aborted) return;
      }
    } catch {
      callbacks.onDrop();
      await sleep(500);
      continue;
    }
    if (callbacks.shouldResync()) continue;
    callbacks.onClose();
    return;
  }
}

export { parseEnvelope };

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
