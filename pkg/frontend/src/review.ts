/**
 * Verdict submission.  The console never invents verdicts: submitVerdict is
 * called only from explicit user gestures (a priority button or its
 * keyboard shortcut) and issues at most one POST per call — re-entry while
 * a request is in flight is refused by the submitting flag.
 */

import { PriorityLabel, PRIORITY_LABELS } from "./protocol.js";
import { applySubmitResult, markSubmitting, Store, SubmitResult } from "./session.js";

export interface ReviewOutcome {
  status: number;
  detail: string | null;
}

export interface VerdictPoster {
  postReview(alertId: number, priority: string): Promise<ReviewOutcome>;
}

/** Keyboard shortcuts: 0-4 select Normal through Critical. */
export function priorityForKey(key: string): PriorityLabel | null {
  if (key.length !== 1) {
    return null;
  }
  const i = "01234".indexOf(key);
  return i >= 0 ? PRIORITY_LABELS[i] : null;
}

/**
 * Submit the active card's verdict.  Returns true when a request was sent;
 * false means the gesture had no target (no card, or one already in flight).
 */
export async function submitVerdict(
  poster: VerdictPoster,
  store: Store,
  priority: PriorityLabel,
): Promise<boolean> {
  const card = store.get().card;
  if (card === null || card.submitting) {
    return false;
  }
  const alertId = card.alertId;
  store.update((v) => markSubmitting(v, alertId));
  let result: SubmitResult;
  try {
    const outcome = await poster.postReview(alertId, priority);
    if (outcome.status === 200) {
      result = { kind: "accepted" };
    } else {
      result = {
        kind: "rejected",
        status: outcome.status,
        detail: outcome.detail ?? `HTTP ${outcome.status}`,
      };
    }
  } catch (err) {
    result = { kind: "failed", message: err instanceof Error ? err.message : String(err) };
  }
  store.update((v) => applySubmitResult(v, alertId, result));
  return true;
}
