"""HTTP/WebSocket bridge for a live analyst session.

One simulation, one analyst: the simulator thread blocks on a verdict
channel while the network front end serves state snapshots, accepts
verdicts, and streams ordered events to the console.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import anyio.to_thread
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agent import reward
from .analyst import Analyst, ReviewTimeoutError
from .domain import Alert, Priority
from .metrics import summarize_run
from .simulator import RunConfig, RunReport, run

EVENT_SUBPROTOCOL = "defer-soc.v1"


@dataclass
class PendingReview:
    alert_id: int
    features: list
    ai_priority: str
    enqueued_at: float
    remaining_minutes: float

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "features": self.features,
            "ai_priority": self.ai_priority,
            "enqueued_at": self.enqueued_at,
            "remaining_minutes": self.remaining_minutes,
        }


class LiveAnalyst(Analyst):
    """Blocks the simulation loop until the console supplies a verdict."""

    def __init__(self, session: "LiveSession", **kwargs):
        super().__init__(**kwargs)
        self.session = session

    def decide(self, alert: Alert) -> Priority:
        return self.session.await_verdict(alert, self.budget.remaining)


class LiveSession:
    """Owns the simulator thread, the verdict channel, and the event log."""

    def __init__(self, config: RunConfig, source, prioritizer,
                 review_timeout_s: float = 300.0, outdir: Optional[Path] = None):
        self.config = config
        self.source = source
        self.prioritizer = prioritizer
        self.review_timeout_s = review_timeout_s
        self.outdir = Path(outdir) if outdir is not None else None

        self._lock = threading.Lock()
        self._new_event = threading.Condition(self._lock)
        self.events: list[dict] = []
        self.reports: list = []
        self.pending: Optional[PendingReview] = None
        self.started = False
        self.finished = False
        self.awaiting = False
        self.paused = False
        self.error: Optional[str] = None
        self.report: Optional[RunReport] = None
        self._verdicts: "queue.Queue[Priority]" = queue.Queue(maxsize=1)
        self._resume = threading.Event()
        self._resume.set()
        self._thread: Optional[threading.Thread] = None

    # -- lifecycle -------------------------------------------------------------

    def start(self):
        if self._thread is not None:
            return
        self.started = True
        self._thread = threading.Thread(target=self._run, name="defer-soc-sim", daemon=True)
        self._thread.start()

    def _run(self):
        analyst = LiveAnalyst(self, charge_by=self.config.charge_by)
        try:
            report = run(self.config, self.source, self.prioritizer,
                         analyst=analyst, gate=self._gate, on_step=self._on_step)
        except Exception as e:
            with self._lock:
                self.error = f"{type(e).__name__}: {e}"
                self.finished = True
            self._emit("run_finished", {"error": self.error})
            return
        self.report = report
        if self.outdir is not None:
            from .cli import write_artifacts

            write_artifacts(report, self.outdir)
        with self._lock:
            self.finished = True
        self._emit("run_finished", {
            "summary": report.summary,
            "avar_size": report.avar_size,
            "wall_s": report.wall_s,
        })

    def join(self, timeout: Optional[float] = None):
        if self._thread is not None:
            self._thread.join(timeout)

    def _gate(self):
        self._resume.wait()

    def _on_step(self, report):
        with self._lock:
            self.reports.append(report)
        self._emit("step_completed", report.to_dict())

    # -- events ----------------------------------------------------------------

    def _emit(self, kind: str, data: dict):
        with self._new_event:
            self.events.append({"type": kind, "seq": len(self.events), "data": data})
            self._new_event.notify_all()

    def wait_event(self, cursor: int, timeout: float = 0.5) -> Optional[dict]:
        with self._new_event:
            if cursor < len(self.events):
                return self.events[cursor]
            self._new_event.wait(timeout)
            if cursor < len(self.events):
                return self.events[cursor]
            return None

    # -- review channel (simulator side) ----------------------------------------

    def await_verdict(self, alert: Alert, remaining_minutes: float) -> Priority:
        with self._lock:
            self.pending = PendingReview(
                alert_id=alert.id,
                features=[float(x) for x in alert.features],
                ai_priority=alert.ai_priority.label,
                enqueued_at=time.time(),
                remaining_minutes=remaining_minutes,
            )
            self.awaiting = True
        self._emit("review_requested", self.pending.to_dict())
        try:
            verdict = self._verdicts.get(timeout=self.review_timeout_s)
        except queue.Empty:
            with self._lock:
                if self.pending is None:
                    # verdict landed between the timeout and this check
                    try:
                        verdict = self._verdicts.get_nowait()
                    except queue.Empty:
                        self.awaiting = False
                        raise ReviewTimeoutError(f"alert {alert.id}") from None
                else:
                    self.pending = None
                    self.awaiting = False
                    self._emit_locked_timeout(alert.id)
                    raise ReviewTimeoutError(f"alert {alert.id}") from None
        with self._lock:
            self.awaiting = False
        self._emit("verdict_applied", {
            "alert_id": alert.id,
            "priority": verdict.label,
            "reward": reward(alert.ai_priority, verdict, True, self.config.agent.reward),
        })
        return verdict

    def _emit_locked_timeout(self, alert_id: int):
        # called with self._lock held; Condition shares the lock so appending
        # directly keeps the event order consistent
        self.events.append({"type": "review_timeout", "seq": len(self.events),
                            "data": {"alert_id": alert_id}})
        self._new_event.notify_all()

    # -- review channel (HTTP side) ----------------------------------------------

    def submit_verdict(self, alert_id: int, priority: Priority) -> dict:
        with self._lock:
            if self.pending is None or self.pending.alert_id != alert_id:
                raise HTTPException(status_code=409, detail="no matching pending review")
            self.pending = None
        self._verdicts.put(priority)
        return {"alert_id": alert_id, "priority": priority.label}

    # -- snapshots -----------------------------------------------------------------

    def status(self) -> str:
        if self.finished:
            return "finished"
        if self.awaiting:
            return "awaiting_verdict"
        if self.paused:
            return "paused"
        return "running"

    def snapshot(self) -> tuple[dict, int]:
        """State snapshot plus the event cursor it corresponds to."""
        with self._lock:
            reports = list(self.reports)
            data = {
                "status": self.status(),
                "step": len(reports),
                "total_steps": self.config.steps,
                "mode": self.config.mode,
                "pending_review": self.pending.to_dict() if self.pending else None,
                "error": self.error,
                "metrics": summarize_run(reports) if reports else None,
                "steps": [r.to_dict() for r in reports],
            }
            return data, len(self.events)

    def pause(self):
        with self._lock:
            self.paused = True
        self._resume.clear()

    def resume(self):
        with self._lock:
            self.paused = False
        self._resume.set()


# ---------------------------------------------------------------------------
# HTTP app


class ReviewBody(BaseModel):
    alert_id: int
    priority: str


def create_app(session: LiveSession) -> FastAPI:
    app = FastAPI(title="defer-soc live service")
    app.state.session = session

    @app.get("/api/state")
    def get_state():
        if not session.started:
            return JSONResponse(status_code=503, content={"detail": "session not initialized"})
        data, _ = session.snapshot()
        return data

    @app.post("/api/review")
    def post_review(body: ReviewBody):
        try:
            priority = Priority.from_label(body.priority)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"invalid priority {body.priority!r}")
        return session.submit_verdict(body.alert_id, priority)

    @app.post("/api/pause")
    def post_pause():
        session.pause()
        return {"status": session.status()}

    @app.post("/api/resume")
    def post_resume():
        session.resume()
        return {"status": session.status()}

    @app.websocket("/api/events")
    async def ws_events(ws: WebSocket):
        offered = ws.scope.get("subprotocols") or []
        await ws.accept(subprotocol=EVENT_SUBPROTOCOL if EVENT_SUBPROTOCOL in offered else None)
        data, cursor = session.snapshot()
        try:
            await ws.send_json({"type": "snapshot", "seq": None, "data": data})
            while True:
                ev = await anyio.to_thread.run_sync(session.wait_event, cursor)
                if ev is None:
                    if session.finished and cursor >= len(session.events):
                        continue  # stay open so late clients can still read state
                    continue
                await ws.send_json(ev)
                cursor += 1
        except (WebSocketDisconnect, RuntimeError):
            return

    return app


def serve_run(config: RunConfig, source, prioritizer, outdir,
              host: str = "127.0.0.1", port: int = 8080,
              review_timeout_s: float = 300.0):
    """Run one live session behind uvicorn; blocks until the server stops."""
    import contextlib

    import uvicorn

    session = LiveSession(config, source, prioritizer,
                          review_timeout_s=review_timeout_s, outdir=Path(outdir))

    @contextlib.asynccontextmanager
    async def lifespan(app):
        session.start()
        yield

    app = create_app(session)
    app.router.lifespan_context = lifespan
    uvicorn.run(app, host=host, port=port, log_level="warning")
