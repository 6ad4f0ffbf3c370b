// Browser entry point: connect to the gateway, keep the view in sync.

import { dispatchCommand, parseEnvelope, runEventLoop } from "./client.js";
import { CommandAction } from "./protocol.js";
import {
  ConsoleState,
  applyEnvelope,
  initialState,
  resetForResync,
  selectAlert,
  setConnection,
} from "./store.js";
import { renderApp } from "./render.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("gateway") ?? "http://127.0.0.1:8008";

const root = document.getElementById("app")!;

const store = {
  state: initialState(),
  update(next: ConsoleState) {
    this.state = next;
    root.innerHTML = renderApp(next);
  },
};

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("[data-alert]") as HTMLElement | null;
  if (!target) return;
  const alertId = target.dataset.alert!;
  const action = target.dataset.action as CommandAction | undefined;
  if (action) {
    void dispatchCommand(store, base, alertId, action, fetch.bind(window));
  } else {
    store.update(selectAlert(store.state, alertId));
  }
});

void runEventLoop(
  base,
  {
    fromSeq: () => (store.state.needsResync ? 1 : store.state.lastSeq + 1),
    onEnvelope(line) {
      let next = applyEnvelope(store.state, parseEnvelope(line));
      if (next.needsResync) {
        next = resetForResync(next);
      }
      store.update(next);
    },
    shouldResync: () => store.state.needsResync,
    onDrop() {
      store.update(setConnection(store.state, "connecting"));
    },
    onClose() {
      store.update({ ...store.state, connection: "closed", finished: true });
    },
  },
  fetch.bind(window),
);
