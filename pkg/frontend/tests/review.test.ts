import { describe, expect, it } from "vitest";

import { priorityForKey, ReviewOutcome, submitVerdict, VerdictPoster } from "../src/review.js";
import { applyEvent, Store } from "../src/session.js";
import { loadFrames } from "./helpers.js";

const frames = loadFrames();

class FakePoster implements VerdictPoster {
  calls: Array<{ alertId: number; priority: string }> = [];
  private queue: Array<Promise<ReviewOutcome>> = [];

  respondWith(outcome: ReviewOutcome | Promise<ReviewOutcome>): void {
    this.queue.push(Promise.resolve(outcome));
  }

  postReview(alertId: number, priority: string): Promise<ReviewOutcome> {
    this.calls.push({ alertId, priority });
    return this.queue.shift() ?? Promise.resolve({ status: 200, detail: null });
  }
}

function storeWithCard(): { store: Store; alertId: number } {
  const store = new Store();
  store.update((v) => applyEvent(v, frames[0]));
  const review = frames.find((f) => f.type === "review_requested")!;
  store.update((v) => applyEvent(v, review));
  return { store, alertId: (review.data as { alert_id: number }).alert_id };
}

describe("submitVerdict", () => {
  it("sends exactly one POST per gesture", async () => {
    const { store, alertId } = storeWithCard();
    const poster = new FakePoster();
    const sent = await submitVerdict(poster, store, "high");
    expect(sent).toBe(true);
    expect(poster.calls).toEqual([{ alertId, priority: "high" }]);
    expect(store.get().card).toBeNull();
  });

  it("refuses a second gesture while one is in flight", async () => {
    const { store } = storeWithCard();
    const poster = new FakePoster();
    let release!: (o: ReviewOutcome) => void;
    poster.respondWith(new Promise<ReviewOutcome>((r) => { release = r; }));

    const first = submitVerdict(poster, store, "medium");
    const second = await submitVerdict(poster, store, "critical");
    expect(second).toBe(false);
    expect(poster.calls).toHaveLength(1);

    release({ status: 200, detail: null });
    expect(await first).toBe(true);
    expect(store.get().card).toBeNull();
  });

  it("does nothing without a card", async () => {
    const store = new Store();
    const poster = new FakePoster();
    expect(await submitVerdict(poster, store, "low")).toBe(false);
    expect(poster.calls).toHaveLength(0);
  });

  it("shows a 409 inline and allows a retry", async () => {
    const { store, alertId } = storeWithCard();
    const poster = new FakePoster();
    poster.respondWith({ status: 409, detail: "no matching pending review" });

    await submitVerdict(poster, store, "low");
    const card = store.get().card;
    expect(card?.alertId).toBe(alertId);
    expect(card?.error).toBe("no matching pending review");
    expect(card?.submitting).toBe(false);

    // the rejection re-arms the card; a deliberate retry is a new gesture
    await submitVerdict(poster, store, "low");
    expect(poster.calls).toHaveLength(2);
    expect(store.get().card).toBeNull();
  });

  it("shows a 422 inline", async () => {
    const { store } = storeWithCard();
    const poster = new FakePoster();
    poster.respondWith({ status: 422, detail: "invalid priority 'urgent'" });
    await submitVerdict(poster, store, "normal");
    expect(store.get().card?.error).toBe("invalid priority 'urgent'");
  });

  it("falls back to the HTTP status when the body has no detail", async () => {
    const { store } = storeWithCard();
    const poster = new FakePoster();
    poster.respondWith({ status: 502, detail: null });
    await submitVerdict(poster, store, "normal");
    expect(store.get().card?.error).toBe("HTTP 502");
  });

  it("keeps the card when the network fails", async () => {
    const { store, alertId } = storeWithCard();
    const poster = new FakePoster();
    poster.respondWith(Promise.reject(new Error("connection refused")));
    await submitVerdict(poster, store, "high");
    const card = store.get().card;
    expect(card?.alertId).toBe(alertId);
    expect(card?.error).toBe("connection refused");
  });
});

describe("priorityForKey", () => {
  it("maps 0-4 to normal through critical", () => {
    expect(priorityForKey("0")).toBe("normal");
    expect(priorityForKey("1")).toBe("low");
    expect(priorityForKey("2")).toBe("medium");
    expect(priorityForKey("3")).toBe("high");
    expect(priorityForKey("4")).toBe("critical");
  });

  it("ignores everything else", () => {
    for (const key of ["5", "9", "a", "", "Enter", "04", " "]) {
      expect(priorityForKey(key)).toBeNull();
    }
  });
});
