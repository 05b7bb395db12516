/**
 * Chart series and the CSV export.
 *
 * The export must byte-match the service-side steps.csv for the same run:
 * identical column order, integer counts rendered bare, wall_ms fixed to
 * three decimals with the same rounding the service uses, "\n" line
 * endings, and a trailing newline.
 */

import { PRIORITY_LABELS, StepRecord } from "./protocol.js";

const CSV_CATEGORY_FIELDS = ["pred", "correct", "true", "mis"] as const;

export function csvHeader(): string {
  const cols = [
    "step", "arrivals", "stage2_resolved", "stage3", "processed",
    "deferred", "unprocessed", "fp", "fn",
  ];
  for (const label of PRIORITY_LABELS) {
    for (const field of CSV_CATEGORY_FIELDS) {
      cols.push(`${label}_${field}`);
    }
  }
  cols.push("wall_ms");
  return cols.join(",");
}

export function csvRow(r: StepRecord): string {
  const vals = [
    r.step, r.arrivals, r.stage2_resolved, r.stage3, r.processed,
    r.deferred, r.unprocessed, r.fp, r.fn,
  ];
  for (let i = 0; i < PRIORITY_LABELS.length; i++) {
    vals.push(r.pred[i], r.correct[i], r.true[i], r.mis[i]);
  }
  return vals.map(String).join(",") + "," + formatWall(r.wall_ms);
}

export function stepsCsv(steps: StepRecord[]): string {
  const lines = [csvHeader()];
  for (const r of steps) {
    lines.push(csvRow(r));
  }
  return lines.join("\n") + "\n";
}

/**
 * Fixed-point with three decimals, matching the service's formatter, which
 * rounds half to even on the exact value of the double.  toFixed rounds
 * half away from zero, so ties (only exact binary fractions such as 1.0625
 * can tie) would come out one ulp different; everything else agrees.
 */
export function formatWall(x: number): string {
  if (!Number.isFinite(x) || Math.abs(x) >= 1e15) {
    return x.toFixed(3);
  }
  const neg = x < 0 || Object.is(x, -0);
  // 20 fractional digits decide every case: a double below 2^53 whose
  // expansion matches d.ddd5000... through digit 20 must terminate there
  const fixed = Math.abs(x).toFixed(20);
  const dot = fixed.indexOf(".");
  let int = fixed.slice(0, dot);
  const frac = fixed.slice(dot + 1);
  let kept = frac.slice(0, 3);
  const tail = frac.slice(3);
  let roundUp: boolean;
  if (tail[0] > "5") {
    roundUp = true;
  } else if (tail[0] < "5") {
    roundUp = false;
  } else if (/[1-9]/.test(tail.slice(1))) {
    roundUp = true;
  } else {
    roundUp = (kept.charCodeAt(2) - 48) % 2 === 1; // tie: go to even
  }
  if (roundUp) {
    const digits = (int + kept).split("");
    let i = digits.length - 1;
    for (; i >= 0; i--) {
      if (digits[i] === "9") {
        digits[i] = "0";
      } else {
        digits[i] = String(Number(digits[i]) + 1);
        break;
      }
    }
    if (i < 0) {
      digits.unshift("1");
    }
    int = digits.slice(0, -3).join("");
    kept = digits.slice(-3).join("");
  }
  return `${neg ? "-" : ""}${int}.${kept}`;
}

// -- chart series ----------------------------------------------------------------

/** Per-step accuracy for one priority: correct/pred, null where nothing was predicted. */
export function accuracySeries(steps: StepRecord[], category: number): (number | null)[] {
  return steps.map((r) => (r.pred[category] > 0 ? r.correct[category] / r.pred[category] : null));
}

export function deferredSeries(steps: StepRecord[]): number[] {
  return steps.map((r) => r.deferred);
}

export function unprocessedSeries(steps: StepRecord[]): number[] {
  return steps.map((r) => r.unprocessed);
}
