/**
 * Console state as a pure function of the latest snapshot plus the ordered
 * event log.  Reducers return fresh objects and never touch the DOM or the
 * network, so every transition is unit-testable.
 *
 * Resync rule: a snapshot replaces everything it owns (steps, status,
 * pending review) and resets the event cursor, so reconnecting can never
 * duplicate a step.  A seq gap only sets needsResync — the transport layer
 * reacts by bouncing the socket, which yields a fresh snapshot.
 */

import {
  PendingReview,
  PriorityLabel,
  ServerEvent,
  SessionStatus,
  Snapshot,
  StepRecord,
} from "./protocol.js";

export type Connection = "connecting" | "live" | "retrying";

export interface ReviewCardState {
  alertId: number;
  aiPriority: PriorityLabel;
  features: number[];
  enqueuedAt: number;
  remainingMinutes: number;
  submitting: boolean;
  error: string | null;
}

export interface SessionView {
  connection: Connection;
  retrySeconds: number | null;
  status: SessionStatus;
  step: number;
  totalSteps: number;
  mode: string;
  steps: StepRecord[];
  card: ReviewCardState | null;
  lastSeq: number | null;
  needsResync: boolean;
  /** Sum of rewards observed on this connection; snapshots do not carry it. */
  rewardTotal: number;
  reviewCount: number;
  verdictCount: number;
  timeoutCount: number;
  summary: Record<string, unknown> | null;
  runError: string | null;
}

export function initialView(): SessionView {
  return {
    connection: "connecting",
    retrySeconds: null,
    status: "running",
    step: 0,
    totalSteps: 0,
    mode: "",
    steps: [],
    card: null,
    lastSeq: null,
    needsResync: false,
    rewardTotal: 0,
    reviewCount: 0,
    verdictCount: 0,
    timeoutCount: 0,
    summary: null,
    runError: null,
  };
}

function cardFromReview(review: PendingReview): ReviewCardState {
  return {
    alertId: review.alert_id,
    aiPriority: review.ai_priority,
    features: review.features,
    enqueuedAt: review.enqueued_at,
    remainingMinutes: review.remaining_minutes,
    submitting: false,
    error: null,
  };
}

/** Replace snapshot-owned state; the event cursor restarts at the next frame. */
export function applySnapshot(view: SessionView, snap: Snapshot): SessionView {
  let card: ReviewCardState | null = null;
  if (snap.pending_review !== null) {
    const pending = snap.pending_review;
    // keep submit progress for the same alert so a resync cannot re-arm a
    // click that is already in flight
    card = view.card !== null && view.card.alertId === pending.alert_id
      ? view.card
      : cardFromReview(pending);
  }
  return {
    ...view,
    status: snap.status,
    step: snap.step,
    totalSteps: snap.total_steps,
    mode: snap.mode,
    steps: snap.steps,
    card,
    lastSeq: null,
    needsResync: false,
    runError: snap.error,
  };
}

function appendStep(view: SessionView, record: StepRecord): SessionView {
  if (record.step < view.steps.length) {
    return view; // replayed frame, already covered by the snapshot
  }
  if (record.step > view.steps.length) {
    return { ...view, needsResync: true };
  }
  return { ...view, steps: [...view.steps, record], step: record.step + 1 };
}

export function applyEvent(view: SessionView, ev: ServerEvent): SessionView {
  if (ev.type === "snapshot") {
    return applySnapshot(view, ev.data);
  }
  if (view.lastSeq !== null && ev.seq !== view.lastSeq + 1) {
    return { ...view, needsResync: true };
  }
  const next = { ...view, lastSeq: ev.seq };
  switch (ev.type) {
    case "step_completed":
      return appendStep(next, ev.data);
    case "review_requested":
      return {
        ...next,
        status: "awaiting_verdict",
        card: cardFromReview(ev.data),
        reviewCount: next.reviewCount + 1,
      };
    case "verdict_applied": {
      const matches = next.card !== null && next.card.alertId === ev.data.alert_id;
      return {
        ...next,
        status: next.status === "finished" ? next.status : "running",
        card: matches ? null : next.card,
        rewardTotal: next.rewardTotal + ev.data.reward,
        verdictCount: next.verdictCount + 1,
      };
    }
    case "review_timeout": {
      const matches = next.card !== null && next.card.alertId === ev.data.alert_id;
      return {
        ...next,
        status: next.status === "finished" ? next.status : "running",
        card: matches ? null : next.card,
        timeoutCount: next.timeoutCount + 1,
      };
    }
    case "run_finished":
      return {
        ...next,
        status: "finished",
        card: null,
        summary: ev.data.summary ?? null,
        runError: ev.data.error ?? null,
      };
  }
}

// -- verdict submission ------------------------------------------------------

export type SubmitResult =
  | { kind: "accepted" }
  | { kind: "rejected"; status: number; detail: string }
  | { kind: "failed"; message: string };

/** Arm the in-flight flag; null means there is nothing to submit. */
export function markSubmitting(view: SessionView, alertId: number): SessionView | null {
  if (view.card === null || view.card.alertId !== alertId || view.card.submitting) {
    return null;
  }
  return { ...view, card: { ...view.card, submitting: true, error: null } };
}

export function applySubmitResult(
  view: SessionView,
  alertId: number,
  result: SubmitResult,
): SessionView {
  if (view.card === null || view.card.alertId !== alertId) {
    return view;
  }
  if (result.kind === "accepted") {
    // 200: the verdict landed; verdict_applied follows on the stream
    return { ...view, card: null };
  }
  const message = result.kind === "rejected" ? result.detail : result.message;
  return { ...view, card: { ...view.card, submitting: false, error: message } };
}

// -- connection + control plane -----------------------------------------------

export function markConnecting(view: SessionView): SessionView {
  return { ...view, connection: "connecting", retrySeconds: null };
}

export function markLive(view: SessionView): SessionView {
  return { ...view, connection: "live", retrySeconds: null };
}

export function markRetrying(view: SessionView, seconds: number): SessionView {
  return { ...view, connection: "retrying", retrySeconds: seconds };
}

/** Status returned by POST /api/pause and /api/resume. */
export function applyStatus(view: SessionView, status: SessionStatus): SessionView {
  return { ...view, status };
}

// -- store ---------------------------------------------------------------------

export type Updater = (view: SessionView) => SessionView | null;

/** Single source of truth for the view; listeners re-render on change. */
export class Store {
  private view = initialView();
  private listeners = new Set<(view: SessionView) => void>();

  get(): SessionView {
    return this.view;
  }

  /** Apply a reducer; a null return means "no change" and skips notification. */
  update(fn: Updater): SessionView {
    const next = fn(this.view);
    if (next !== null && next !== this.view) {
      this.view = next;
      for (const listener of this.listeners) {
        listener(next);
      }
    }
    return this.view;
  }

  subscribe(fn: (view: SessionView) => void): () => void {
    this.listeners.add(fn);
    return () => {
      this.listeners.delete(fn);
    };
  }
}
