/** Shared fixture loading for the console tests. */

import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { parseFrame, parseSnapshot, ServerEvent, Snapshot } from "../src/protocol.js";
import { applyEvent, initialView, SessionView } from "../src/session.js";

function fixturePath(name: string): string {
  // the happy-dom environment rewrites import.meta.url, so fall back to the
  // package root (vitest runs with cwd = frontend/)
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  if (url.protocol === "file:") {
    const p = fileURLToPath(url);
    if (existsSync(p)) {
      return p;
    }
  }
  return join(process.cwd(), "tests", "fixtures", name);
}

export function fixtureText(name: string): string {
  return readFileSync(fixturePath(name), "utf8");
}

/** The recorded wire trace: one snapshot frame, then seq 0..N in order. */
export function loadFrames(): ServerEvent[] {
  const raw = JSON.parse(fixtureText("events.json")) as unknown[];
  return raw.map(parseFrame);
}

export function loadFinishedState(): Snapshot {
  return parseSnapshot(JSON.parse(fixtureText("state_finished.json")));
}

export function replay(frames: ServerEvent[], start?: SessionView): SessionView {
  let view = start ?? initialView();
  for (const frame of frames) {
    view = applyEvent(view, frame);
  }
  return view;
}
