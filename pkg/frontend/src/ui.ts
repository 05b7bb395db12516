/**
 * DOM rendering.  render() rebuilds the console from a SessionView; all
 * interaction is routed through the Actions callbacks, so the markup stays
 * a pure projection of session state.
 */

import { accuracySeries, deferredSeries, unprocessedSeries } from "./metrics.js";
import { PriorityLabel, PRIORITY_LABELS } from "./protocol.js";
import { ReviewCardState, SessionView } from "./session.js";

export interface Actions {
  submit(priority: PriorityLabel): void;
  pause(): void;
  resume(): void;
  exportCsv(): void;
}

const CATEGORY_COLORS = ["#8a8f98", "#4c9f70", "#d9a321", "#e4572e", "#b3323f"];
const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) {
    node.className = cls;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function render(root: HTMLElement, view: SessionView, actions: Actions): void {
  root.replaceChildren(
    renderHeader(view, actions),
    renderBanner(view),
    renderReview(view, actions),
    renderMetrics(view),
    renderSummary(view),
  );
}

function renderHeader(view: SessionView, actions: Actions): HTMLElement {
  const header = el("header", "topbar");
  header.append(el("h1", undefined, "defer-soc console"));
  header.append(el("span", `chip status-${view.status}`, view.status.replace("_", " ")));

  const conn = view.connection === "retrying" && view.retrySeconds !== null
    ? `retrying in ${view.retrySeconds}s`
    : view.connection;
  header.append(el("span", `conn conn-${view.connection}`, conn));

  const progress = view.totalSteps > 0
    ? `step ${view.step} / ${view.totalSteps} · ${view.mode}`
    : "";
  header.append(el("span", "progress", progress));

  const controls = el("span", "controls");
  const paused = view.status === "paused";
  const toggle = el("button", "ctl", paused ? "resume" : "pause");
  toggle.disabled = view.status === "finished";
  toggle.onclick = () => (paused ? actions.resume() : actions.pause());
  controls.append(toggle);

  const exportBtn = el("button", "ctl", "export csv");
  exportBtn.disabled = view.steps.length === 0;
  exportBtn.onclick = () => actions.exportCsv();
  controls.append(exportBtn);
  header.append(controls);
  return header;
}

function renderBanner(view: SessionView): HTMLElement {
  const banner = el("div", "banner");
  if (view.runError !== null) {
    banner.classList.add("error");
    banner.textContent = `run failed: ${view.runError}`;
  } else if (view.connection === "retrying") {
    banner.classList.add("warn");
    banner.textContent = view.retrySeconds !== null
      ? `connection lost — retrying in ${view.retrySeconds}s`
      : "connection lost — retrying";
  } else {
    banner.classList.add("hidden");
  }
  return banner;
}

function renderReview(view: SessionView, actions: Actions): HTMLElement {
  const section = el("section", "review");
  if (view.card !== null) {
    section.append(renderCard(view.card, actions));
  } else if (view.status === "finished") {
    section.append(el("p", "idle", "Run finished — no more reviews."));
  } else {
    section.append(el("p", "idle", "No review pending. Deferred alerts appear here."));
  }
  return section;
}

function renderCard(card: ReviewCardState, actions: Actions): HTMLElement {
  const box = el("div", "review-card");

  const head = el("div", "card-head");
  head.append(el("strong", undefined, `Alert #${card.alertId}`));
  head.append(el("span", `chip prio-${card.aiPriority}`, `AI: ${card.aiPriority}`));
  head.append(el("span", "budget", `${card.remainingMinutes.toFixed(1)} min left in step`));
  box.append(head);

  box.append(renderFeatureStrip(card.features));

  const buttons = el("div", "verdicts");
  PRIORITY_LABELS.forEach((label, i) => {
    const b = el("button", `verdict prio-${label}`, `${i} ${label}`);
    b.disabled = card.submitting;
    b.onclick = () => actions.submit(label);
    buttons.append(b);
  });
  box.append(buttons);

  if (card.submitting) {
    box.append(el("p", "submitting", "submitting…"));
  }
  if (card.error !== null) {
    box.append(el("p", "card-error", card.error));
  }
  return box;
}

function renderFeatureStrip(features: number[]): HTMLElement {
  const strip = el("div", "features");
  const max = features.reduce((m, v) => Math.max(m, Math.abs(v)), 1e-9);
  features.forEach((v, i) => {
    const bar = el("span", `fbar ${v < 0 ? "neg" : "pos"}`);
    bar.style.height = `${Math.max(2, Math.round((Math.abs(v) / max) * 44))}px`;
    bar.title = `f${i} = ${v.toPrecision(4)}`; // raw value on hover
    strip.append(bar);
  });
  return strip;
}

function renderMetrics(view: SessionView): HTMLElement {
  const section = el("section", "metrics");

  const tiles = el("div", "tiles");
  tiles.append(
    tile("reward", view.rewardTotal.toFixed(1)),
    tile("reviews", String(view.reviewCount)),
    tile("verdicts", String(view.verdictCount)),
    tile("timeouts", String(view.timeoutCount)),
  );
  section.append(tiles);

  if (view.steps.length > 0) {
    const charts = el("div", "charts");
    const acc = PRIORITY_LABELS.map((label, i) => ({
      color: CATEGORY_COLORS[i],
      label,
      points: accuracySeries(view.steps, i),
    }));
    charts.append(lineChart("per-priority accuracy", acc, 1));
    charts.append(barChart("deferred per step", deferredSeries(view.steps), "#5b7db1"));
    charts.append(barChart("unprocessed per step", unprocessedSeries(view.steps), "#b3323f"));
    section.append(charts);
  }
  return section;
}

function tile(label: string, value: string): HTMLElement {
  const t = el("div", "tile");
  t.append(el("div", "tile-value", value));
  t.append(el("div", "tile-label", label));
  return t;
}

interface Series {
  color: string;
  label: string;
  points: (number | null)[];
}

function chartShell(title: string): { box: HTMLElement; svg: SVGSVGElement } {
  const box = el("div", "chart");
  box.append(el("div", "chart-title", title));
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", "0 0 320 120");
  svg.setAttribute("width", "320");
  svg.setAttribute("height", "120");
  box.append(svg);
  return { box, svg };
}

function lineChart(title: string, series: Series[], yMax: number): HTMLElement {
  const { box, svg } = chartShell(title);
  const n = Math.max(...series.map((s) => s.points.length));
  for (const s of series) {
    // break the polyline where the series has no value
    let run: string[] = [];
    const flush = () => {
      if (run.length > 1) {
        const line = document.createElementNS(SVG_NS, "polyline");
        line.setAttribute("points", run.join(" "));
        line.setAttribute("fill", "none");
        line.setAttribute("stroke", s.color);
        line.setAttribute("stroke-width", "1.5");
        svg.append(line);
      }
      run = [];
    };
    s.points.forEach((v, i) => {
      if (v === null) {
        flush();
        return;
      }
      const x = n > 1 ? (i / (n - 1)) * 312 + 4 : 160;
      const y = 116 - (Math.min(v, yMax) / yMax) * 112;
      run.push(`${x.toFixed(1)},${y.toFixed(1)}`);
    });
    flush();
  }
  const legend = el("div", "legend");
  for (const s of series) {
    const item = el("span", "legend-item", s.label);
    item.style.color = s.color;
    legend.append(item);
  }
  box.append(legend);
  return box;
}

function barChart(title: string, values: number[], color: string): HTMLElement {
  const { box, svg } = chartShell(title);
  const max = values.reduce((m, v) => Math.max(m, v), 1);
  const slot = 312 / Math.max(values.length, 1);
  values.forEach((v, i) => {
    const h = (v / max) * 112;
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", (4 + i * slot).toFixed(1));
    rect.setAttribute("y", (116 - h).toFixed(1));
    rect.setAttribute("width", Math.max(1, slot - 1).toFixed(1));
    rect.setAttribute("height", Math.max(h, v > 0 ? 1 : 0).toFixed(1));
    rect.setAttribute("fill", color);
    const tip = document.createElementNS(SVG_NS, "title");
    tip.textContent = `step ${i}: ${v}`;
    rect.append(tip);
    svg.append(rect);
  });
  return box;
}

function renderSummary(view: SessionView): HTMLElement {
  const section = el("section", "summary");
  if (view.status !== "finished" || view.summary === null) {
    section.classList.add("hidden");
    return section;
  }
  section.append(el("h2", undefined, "Run summary"));
  const dl = el("dl");
  for (const key of ["arrivals", "processed", "deferred", "unprocessed", "processed_pct",
                     "overall_accuracy", "overall_accuracy_without_normal"]) {
    const v = view.summary[key];
    if (v === undefined) {
      continue;
    }
    dl.append(el("dt", undefined, key.replaceAll("_", " ")));
    dl.append(el("dd", undefined, typeof v === "number" ? formatSummary(v) : String(v)));
  }
  section.append(dl);
  return section;
}

function formatSummary(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(3);
}
