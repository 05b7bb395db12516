/**
 * Network plumbing: REST calls plus the event stream with reconnect.
 * Socket construction is injectable so the stream logic runs under tests
 * without a browser WebSocket.
 */

import {
  EVENT_SUBPROTOCOL,
  parseServerEvent,
  parseSessionStatus,
  parseSnapshot,
  ProtocolError,
  ServerEvent,
  SessionStatus,
  Snapshot,
} from "./protocol.js";
import { ReviewOutcome, VerdictPoster } from "./review.js";

export class HttpApi implements VerdictPoster {
  constructor(private readonly base: string = "") {}

  /** null while the service responds 503 (session not initialized yet). */
  async state(): Promise<Snapshot | null> {
    const resp = await fetch(`${this.base}/api/state`);
    if (resp.status === 503) {
      return null;
    }
    if (!resp.ok) {
      throw new Error(`GET /api/state failed: HTTP ${resp.status}`);
    }
    return parseSnapshot(await resp.json());
  }

  async postReview(alertId: number, priority: string): Promise<ReviewOutcome> {
    const resp = await fetch(`${this.base}/api/review`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ alert_id: alertId, priority }),
    });
    if (resp.ok) {
      return { status: resp.status, detail: null };
    }
    let detail: string | null = null;
    try {
      const body: unknown = await resp.json();
      if (typeof body === "object" && body !== null && "detail" in body) {
        const d = (body as { detail: unknown }).detail;
        detail = typeof d === "string" ? d : JSON.stringify(d);
      }
    } catch {
      // non-JSON error body; fall through with the bare status
    }
    return { status: resp.status, detail };
  }

  async pause(): Promise<SessionStatus> {
    return this.toggle("pause");
  }

  async resume(): Promise<SessionStatus> {
    return this.toggle("resume");
  }

  private async toggle(which: "pause" | "resume"): Promise<SessionStatus> {
    const resp = await fetch(`${this.base}/api/${which}`, { method: "POST" });
    if (!resp.ok) {
      throw new Error(`POST /api/${which} failed: HTTP ${resp.status}`);
    }
    const body = (await resp.json()) as { status?: unknown };
    return parseSessionStatus(body.status);
  }
}

// -- event stream --------------------------------------------------------------

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export type SocketFactory = (url: string, protocols: string[]) => SocketLike;

export interface StreamHandlers {
  onFrame(ev: ServerEvent): void;
  onOpen(): void;
  onRetry(delaySeconds: number): void;
  onProtocolError?(err: ProtocolError): void;
}

const BASE_RETRY_S = 0.5;
const MAX_RETRY_S = 15;

function browserSocket(url: string, protocols: string[]): SocketLike {
  return new WebSocket(url, protocols) as unknown as SocketLike;
}

/**
 * WebSocket subscription that survives drops.  Every (re)connect yields a
 * fresh server snapshot before new events, so the reducer's resync rule
 * keeps the view duplicate-free without any client-side replay buffer.
 */
export class EventStream {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;

  constructor(
    private readonly url: string,
    private readonly handlers: StreamHandlers,
    private readonly makeSocket: SocketFactory = browserSocket,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.closeSocket();
  }

  /** Drop the stream and reconnect now; used when a seq gap demands a fresh snapshot. */
  bounce(): void {
    if (this.stopped) {
      return;
    }
    this.attempts = 0;
    this.closeSocket();
    this.connect();
  }

  private closeSocket(): void {
    const socket = this.socket;
    if (socket === null) {
      return;
    }
    this.socket = null;
    socket.onopen = socket.onmessage = socket.onclose = socket.onerror = null;
    socket.close();
  }

  private connect(): void {
    const socket = this.makeSocket(this.url, [EVENT_SUBPROTOCOL]);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.handlers.onOpen();
    };
    socket.onmessage = (ev) => {
      let frame: ServerEvent;
      try {
        frame = parseServerEvent(String(ev.data));
      } catch (err) {
        if (err instanceof ProtocolError) {
          // a broken frame poisons the cursor; start over from a snapshot
          this.handlers.onProtocolError?.(err);
          this.bounce();
          return;
        }
        throw err;
      }
      this.handlers.onFrame(frame);
    };
    socket.onclose = () => {
      if (this.stopped || this.socket !== socket) {
        return;
      }
      this.socket = null;
      this.scheduleRetry();
    };
    socket.onerror = () => {
      // the close handler owns retries
    };
  }

  private scheduleRetry(): void {
    const delay = Math.min(MAX_RETRY_S, BASE_RETRY_S * 2 ** this.attempts);
    this.attempts += 1;
    this.handlers.onRetry(delay);
    this.timer = setTimeout(() => {
      this.timer = null;
      if (!this.stopped) {
        this.connect();
      }
    }, delay * 1000);
  }
}
