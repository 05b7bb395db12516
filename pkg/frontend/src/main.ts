/**
 * Entry point: wires the store, the HTTP API, the event stream, and the
 * renderer together.  Hydrates once from GET /api/state so a page refresh
 * shows history immediately, then lets the WebSocket snapshot take over.
 */

import { stepsCsv } from "./metrics.js";
import { priorityForKey, submitVerdict } from "./review.js";
import {
  applyEvent,
  applySnapshot,
  applyStatus,
  markLive,
  markRetrying,
  Store,
} from "./session.js";
import { EventStream, HttpApi } from "./transport.js";
import { Actions, render } from "./ui.js";

const api = new HttpApi("");
const store = new Store();
const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}

const wsScheme = location.protocol === "https:" ? "wss:" : "ws:";
const stream = new EventStream(`${wsScheme}//${location.host}/api/events`, {
  onFrame: (frame) => {
    store.update((v) => applyEvent(v, frame));
    if (store.get().needsResync) {
      stream.bounce();
    }
  },
  onOpen: () => store.update(markLive),
  onRetry: (seconds) => store.update((v) => markRetrying(v, seconds)),
  onProtocolError: (err) => console.warn("bad frame, resyncing:", err.message),
});

const actions: Actions = {
  submit: (priority) => {
    void submitVerdict(api, store, priority);
  },
  pause: () => {
    api.pause()
      .then((status) => store.update((v) => applyStatus(v, status)))
      .catch((err) => console.warn("pause failed:", err));
  },
  resume: () => {
    api.resume()
      .then((status) => store.update((v) => applyStatus(v, status)))
      .catch((err) => console.warn("resume failed:", err));
  },
  exportCsv: () => {
    const blob = new Blob([stepsCsv(store.get().steps)], { type: "text/csv" });
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = "steps.csv";
    a.click();
    URL.revokeObjectURL(url);
  },
};

store.subscribe((view) => render(root, view, actions));
render(root, store.get(), actions);

document.addEventListener("keydown", (ev) => {
  if (ev.altKey || ev.ctrlKey || ev.metaKey) {
    return;
  }
  const priority = priorityForKey(ev.key);
  if (priority !== null) {
    actions.submit(priority);
  }
});

async function hydrate(): Promise<void> {
  try {
    const snap = await api.state();
    if (snap !== null) {
      store.update((v) => applySnapshot(v, snap));
    }
  } catch (err) {
    // the stream's own snapshot will cover for a failed first fetch
    console.warn("initial state fetch failed:", err);
  }
  stream.start();
}

void hydrate();
