"""
Driving a live review session over HTTP
=======================================

`defer-soc run --live` serves the simulation behind a small HTTP/WebSocket
API and blocks each deferral until a human answers.  Here the human is an
autopilot on the same machine: it polls /api/state and rubber-stamps every
machine priority.  Confirming the machine verdict pays the agent -5 each
time, so even this lazy reviewer teaches the agent something - that its
deferrals were unnecessary.

The browser console in frontend/ speaks the same protocol, plus the
/api/events WebSocket used for the streaming charts.
"""

import json
import socket
import threading
import time
import urllib.request
from pathlib import Path

import uvicorn

from defer_soc.agent import AgentConfig
from defer_soc.cli import load_config
from defer_soc.ingest import SynthConfig, synth_generate
from defer_soc.live_service import LiveSession, create_app
from defer_soc.prioritizer import ConfusionMatrix
from defer_soc.simulator import DatasetSource, RunConfig

OUT = Path(__file__).parent / "out" / "live_session"


def api(port, path, payload=None):
    url = f"http://127.0.0.1:{port}{path}"
    data = None if payload is None else json.dumps(payload).encode()
    req = urllib.request.Request(url, data=data, method="POST" if data else "GET")
    if data:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# --- session and server -------------------------------------------------------

cfg = RunConfig(
    mode="l2dhf", steps=12, lam=6.0, seed=9,
    agent=AgentConfig(hidden=(32, 32, 16), buffer_capacity=500, batch_size=32),
)
prioritizer = ConfusionMatrix.from_rows(load_config("paper_unsw")["prioritizer"]["matrix"])
session = LiveSession(cfg, DatasetSource(synth_generate(SynthConfig(seed=4), 200)),
                      prioritizer=prioritizer, review_timeout_s=30.0, outdir=OUT)

port = free_port()
server = uvicorn.Server(uvicorn.Config(create_app(session), host="127.0.0.1",
                                       port=port, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.01)
print(f"serving on 127.0.0.1:{port}")

# --- autopilot reviewer -------------------------------------------------------

session.start()
answered = 0
shown = 0
while True:
    state = api(port, "/api/state")
    if state["status"] == "finished":
        break
    pending = state.get("pending_review")
    if state["status"] == "awaiting_verdict" and pending:
        label = pending["ai_priority"]
        if shown < 5:
            print(f"  step {state['step']:>2}  alert {pending['alert_id']:>4} "
                  f"machine={label:<8}  verdict={label} (confirmed)")
            shown += 1
        api(port, "/api/review", {"alert_id": pending["alert_id"], "priority": label})
        answered += 1
    else:
        time.sleep(0.002)

session.join(10.0)
server.should_exit = True
thread.join(5.0)

print(f"\nrun finished: {answered} reviews answered"
      f" ({shown} shown above, the rest confirmed silently)")
deferred = [s["deferred"] for s in session.snapshot()[0]["steps"]]
print(f"deferrals per step: {deferred}")
print(f"artifacts in {OUT}: {sorted(p.name for p in OUT.iterdir())}")
