import { describe, expect, it } from "vitest";

import {
  accuracySeries,
  csvHeader,
  deferredSeries,
  formatWall,
  stepsCsv,
  unprocessedSeries,
} from "../src/metrics.js";
import { StepRecord } from "../src/protocol.js";
import { fixtureText, loadFinishedState, loadFrames } from "./helpers.js";

function stepsFromTrace(): StepRecord[] {
  return loadFrames()
    .filter((f): f is ReturnType<typeof loadFrames>[number] & { type: "step_completed" } =>
      f.type === "step_completed")
    .map((f) => f.data);
}

describe("csv export", () => {
  it("byte-matches the service artifact for the same run", () => {
    expect(stepsCsv(stepsFromTrace())).toBe(fixtureText("steps.csv"));
  });

  it("byte-matches when built from a snapshot instead of events", () => {
    expect(stepsCsv(loadFinishedState().steps)).toBe(fixtureText("steps.csv"));
  });

  it("writes the service's header order", () => {
    expect(csvHeader()).toBe(fixtureText("steps.csv").split("\n")[0]);
  });

  it("emits only \\n line endings and a trailing newline", () => {
    const text = stepsCsv(stepsFromTrace());
    expect(text.includes("\r")).toBe(false);
    expect(text.endsWith("\n")).toBe(true);
    expect(text.endsWith("\n\n")).toBe(false);
  });
});

describe("formatWall", () => {
  it("agrees with the service formatter on recorded and adversarial values", () => {
    const cases = JSON.parse(fixtureText("wall_format_cases.json")) as [string, string][];
    expect(cases.length).toBeGreaterThan(100);
    for (const [repr, expected] of cases) {
      expect(formatWall(Number(repr)), `formatWall(${repr})`).toBe(expected);
    }
  });

  it("rounds ties half to even like the service", () => {
    expect(formatWall(1.0625)).toBe("1.062");
    expect(formatWall(0.1875)).toBe("0.188");
    expect(formatWall(999.9995)).toBe("1000.000");
  });
});

describe("chart series", () => {
  const steps = stepsFromTrace();

  it("computes per-priority accuracy with gaps where nothing was predicted", () => {
    const normal = accuracySeries(steps, 0);
    steps.forEach((r, i) => {
      if (r.pred[0] === 0) {
        expect(normal[i]).toBeNull();
      } else {
        expect(normal[i]).toBeCloseTo(r.correct[0] / r.pred[0], 12);
      }
    });
    expect(normal.some((v) => v === null)).toBe(true); // step 4 predicts no normals
  });

  it("extracts deferral and backlog series", () => {
    expect(deferredSeries(steps)).toEqual(steps.map((r) => r.deferred));
    expect(unprocessedSeries(steps)).toEqual(steps.map((r) => r.unprocessed));
  });

  it("yields all-zero series for a run with no deferrals", () => {
    const quiet = steps.map((r) => ({ ...r, deferred: 0, unprocessed: 0 }));
    expect(deferredSeries(quiet).every((v) => v === 0)).toBe(true);
    expect(unprocessedSeries(quiet).every((v) => v === 0)).toBe(true);
  });
});
