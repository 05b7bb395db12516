/**
 * Wire protocol for the defer-soc live service.
 *
 * Mirrors the JSON the service emits over GET /api/state and the
 * /api/events WebSocket (subprotocol defer-soc.v1): one snapshot frame
 * first, then events whose seq numbers are contiguous.  Parsers here are
 * strict on purpose — a malformed frame invalidates the event cursor, so
 * the stream layer treats ProtocolError as "reconnect and resnapshot".
 */

export const EVENT_SUBPROTOCOL = "defer-soc.v1";

export const PRIORITY_LABELS = ["normal", "low", "medium", "high", "critical"] as const;

export type PriorityLabel = (typeof PRIORITY_LABELS)[number];

export type SessionStatus = "running" | "paused" | "awaiting_verdict" | "finished";

const SESSION_STATUSES: readonly string[] = ["running", "paused", "awaiting_verdict", "finished"];

/** One completed simulation step; the count arrays follow PRIORITY_LABELS order. */
export interface StepRecord {
  step: number;
  arrivals: number;
  stage2_resolved: number;
  stage3: number;
  processed: number;
  deferred: number;
  unprocessed: number;
  fp: number;
  fn: number;
  pred: number[];
  correct: number[];
  true: number[];
  mis: number[];
  wall_ms: number;
}

export interface PendingReview {
  alert_id: number;
  features: number[];
  ai_priority: PriorityLabel;
  enqueued_at: number;
  remaining_minutes: number;
}

export interface Snapshot {
  status: SessionStatus;
  step: number;
  total_steps: number;
  mode: string;
  pending_review: PendingReview | null;
  error: string | null;
  metrics: Record<string, unknown> | null;
  steps: StepRecord[];
}

export interface VerdictApplied {
  alert_id: number;
  priority: PriorityLabel;
  reward: number;
}

export interface RunFinished {
  summary?: Record<string, unknown>;
  avar_size?: number;
  wall_s?: number;
  error?: string;
}

export type ServerEvent =
  | { type: "snapshot"; seq: null; data: Snapshot }
  | { type: "step_completed"; seq: number; data: StepRecord }
  | { type: "review_requested"; seq: number; data: PendingReview }
  | { type: "verdict_applied"; seq: number; data: VerdictApplied }
  | { type: "review_timeout"; seq: number; data: { alert_id: number } }
  | { type: "run_finished"; seq: number; data: RunFinished };

export class ProtocolError extends Error {}

function asObject(x: unknown, what: string): Record<string, unknown> {
  if (typeof x !== "object" || x === null || Array.isArray(x)) {
    throw new ProtocolError(`${what} is not an object`);
  }
  return x as Record<string, unknown>;
}

function asNumber(x: unknown, what: string): number {
  if (typeof x !== "number" || !Number.isFinite(x)) {
    throw new ProtocolError(`${what} is not a finite number`);
  }
  return x;
}

function asCounts(x: unknown, what: string): number[] {
  if (!Array.isArray(x) || x.length !== PRIORITY_LABELS.length) {
    throw new ProtocolError(`${what} must hold one count per priority`);
  }
  return x.map((v, i) => asNumber(v, `${what}[${i}]`));
}

function asLabel(x: unknown, what: string): PriorityLabel {
  if (typeof x !== "string" || !(PRIORITY_LABELS as readonly string[]).includes(x)) {
    throw new ProtocolError(`${what}: unknown priority ${JSON.stringify(x)}`);
  }
  return x as PriorityLabel;
}

export function parseSessionStatus(x: unknown): SessionStatus {
  if (typeof x !== "string" || !SESSION_STATUSES.includes(x)) {
    throw new ProtocolError(`unknown session status ${JSON.stringify(x)}`);
  }
  return x as SessionStatus;
}

export function parseStepRecord(x: unknown): StepRecord {
  const o = asObject(x, "step record");
  return {
    step: asNumber(o.step, "step"),
    arrivals: asNumber(o.arrivals, "arrivals"),
    stage2_resolved: asNumber(o.stage2_resolved, "stage2_resolved"),
    stage3: asNumber(o.stage3, "stage3"),
    processed: asNumber(o.processed, "processed"),
    deferred: asNumber(o.deferred, "deferred"),
    unprocessed: asNumber(o.unprocessed, "unprocessed"),
    fp: asNumber(o.fp, "fp"),
    fn: asNumber(o.fn, "fn"),
    pred: asCounts(o.pred, "pred"),
    correct: asCounts(o.correct, "correct"),
    true: asCounts(o["true"], "true"),
    mis: asCounts(o.mis, "mis"),
    wall_ms: asNumber(o.wall_ms, "wall_ms"),
  };
}

export function parsePendingReview(x: unknown): PendingReview {
  const o = asObject(x, "pending review");
  if (!Array.isArray(o.features)) {
    throw new ProtocolError("features is not an array");
  }
  return {
    alert_id: asNumber(o.alert_id, "alert_id"),
    features: o.features.map((v, i) => asNumber(v, `features[${i}]`)),
    ai_priority: asLabel(o.ai_priority, "ai_priority"),
    enqueued_at: asNumber(o.enqueued_at, "enqueued_at"),
    remaining_minutes: asNumber(o.remaining_minutes, "remaining_minutes"),
  };
}

export function parseSnapshot(x: unknown): Snapshot {
  const o = asObject(x, "snapshot");
  if (!Array.isArray(o.steps)) {
    throw new ProtocolError("snapshot.steps is not an array");
  }
  return {
    status: parseSessionStatus(o.status),
    step: asNumber(o.step, "step"),
    total_steps: asNumber(o.total_steps, "total_steps"),
    mode: String(o.mode ?? ""),
    pending_review: o.pending_review == null ? null : parsePendingReview(o.pending_review),
    error: o.error == null ? null : String(o.error),
    metrics: o.metrics == null ? null : asObject(o.metrics, "metrics"),
    steps: o.steps.map(parseStepRecord),
  };
}

/** Validate one decoded WebSocket frame. */
export function parseFrame(frame: unknown): ServerEvent {
  const o = asObject(frame, "frame");
  if (o.type === "snapshot") {
    if (o.seq !== null) {
      throw new ProtocolError("snapshot frames carry seq null");
    }
    return { type: "snapshot", seq: null, data: parseSnapshot(o.data) };
  }
  const seq = asNumber(o.seq, "seq");
  switch (o.type) {
    case "step_completed":
      return { type: "step_completed", seq, data: parseStepRecord(o.data) };
    case "review_requested":
      return { type: "review_requested", seq, data: parsePendingReview(o.data) };
    case "verdict_applied": {
      const d = asObject(o.data, "verdict_applied data");
      return {
        type: "verdict_applied",
        seq,
        data: {
          alert_id: asNumber(d.alert_id, "alert_id"),
          priority: asLabel(d.priority, "priority"),
          reward: asNumber(d.reward, "reward"),
        },
      };
    }
    case "review_timeout": {
      const d = asObject(o.data, "review_timeout data");
      return { type: "review_timeout", seq, data: { alert_id: asNumber(d.alert_id, "alert_id") } };
    }
    case "run_finished": {
      const d = asObject(o.data, "run_finished data");
      const data: RunFinished = {};
      if (d.error != null) data.error = String(d.error);
      if (d.summary != null) data.summary = asObject(d.summary, "summary");
      if (typeof d.avar_size === "number") data.avar_size = d.avar_size;
      if (typeof d.wall_s === "number") data.wall_s = d.wall_s;
      return { type: "run_finished", seq, data };
    }
    default:
      throw new ProtocolError(`unknown frame type ${JSON.stringify(o.type)}`);
  }
}

/** Decode and validate one raw WebSocket message. */
export function parseServerEvent(raw: string): ServerEvent {
  let frame: unknown;
  try {
    frame = JSON.parse(raw);
  } catch (err) {
    throw new ProtocolError(`frame is not JSON: ${(err as Error).message}`);
  }
  return parseFrame(frame);
}
