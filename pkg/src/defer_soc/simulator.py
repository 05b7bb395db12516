"""Discrete-time SOC simulation.

Each step: Poisson arrivals, Stage-1 prioritisation, Stage-2 repository
filtering, and a budgeted Stage-3 scan where the deferral agent (or a
baseline rule) routes alerts between machine acceptance and analyst review.

Modes: l2dhf (full pipeline), l2d (static confidence-threshold deferral),
drlhf_only (agent without Stage-1 fallback or Stage-2 filtering), ai_only.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .agent import AgentConfig, DeferralAgent, Transition, reward
from .analyst import Analyst, Budget, ReviewCosts, ReviewTimeoutError, SimulatedAnalyst
from .avar import Avar
from .domain import Action, Alert, PRIORITIES, Priority
from .ingest import Dataset
from .metrics import StepReport, summarize_run
from .prioritizer import ConfusionMatrix, EnsembleConfig, ensemble_predict, oracle_predict_batch
from .rng import substream

MODES = ("l2dhf", "l2d", "drlhf_only", "ai_only")
POISSON_KNUTH_LIMIT = 30.0


def poisson_sample(lam: float, rng: np.random.Generator) -> int:
    """Exact Poisson draw.

    Knuth's multiplication method for small rates; larger rates split into
    independent partitions of at most 30 each, which preserves exactness
    (a sum of independent Poissons is Poisson in the summed rate).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return 0
    if lam <= POISSON_KNUTH_LIMIT:
        limit = math.exp(-lam)
        count = 0
        prod = rng.random()
        while prod > limit:
            count += 1
            prod *= rng.random()
        return count
    parts = math.ceil(lam / POISSON_KNUTH_LIMIT)
    return sum(poisson_sample(lam / parts, rng) for _ in range(parts))


# ---------------------------------------------------------------------------
# Alert sources


class DatasetSource:
    """Streams a finite labeled pool by uniform resampling with replacement."""

    def __init__(self, dataset: Dataset):
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        self.dataset = dataset
        self._next_id = 0

    def draw(self, n: int, step: int, rng: np.random.Generator) -> list[Alert]:
        idx = rng.integers(0, len(self.dataset), size=n)
        alerts = []
        for i in idx:
            alerts.append(Alert(
                id=self._next_id,
                features=self.dataset.features[i],
                true_priority=Priority(int(self.dataset.labels[i])),
                arrival_step=step,
            ))
            self._next_id += 1
        return alerts


class ScriptedSource:
    """Fixed per-step batches; arrivals bypass the Poisson process."""

    scripted = True

    def __init__(self, batches: Sequence[Sequence[tuple]]):
        self.batches = batches
        self._next_id = 0

    @classmethod
    def from_dataset(cls, dataset: Dataset, order: Iterable[Iterable[int]]) -> "ScriptedSource":
        batches = []
        for step_rows in order:
            batches.append([
                (dataset.features[i], Priority(int(dataset.labels[i]))) for i in step_rows
            ])
        return cls(batches)

    def draw_step(self, step: int) -> list[Alert]:
        alerts = []
        for features, true_priority in self.batches[step]:
            alerts.append(Alert(
                id=self._next_id,
                features=np.asarray(features, dtype=np.float64),
                true_priority=Priority(true_priority),
                arrival_step=step,
            ))
            self._next_id += 1
        return alerts


# ---------------------------------------------------------------------------
# Config and reports


@dataclass
class RunConfig:
    mode: str = "l2dhf"
    steps: int = 2016
    lam: float = 400.0
    seed: int = 0
    agent: AgentConfig = field(default_factory=AgentConfig)
    step_minutes: float = 60.0
    review_fraction: float = 0.8
    charge_by: str = "analyst"
    quantization_decimals: int = 3
    l2d_threshold: float = 0.75
    confidence_members: int = 4
    exclude_normal_from_stage3: bool = False
    record_events: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.confidence_members < 1:
            raise ValueError("confidence_members must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d


@dataclass(frozen=True)
class AlertOutcome:
    """Per-alert trace entry: how one arrival left the pipeline."""

    alert_id: int
    step: int
    true_priority: Priority
    ai_priority: Priority
    final_priority: Optional[Priority]
    outcome: str  # resolved | excluded | accepted | deferred | unprocessed
    reward: Optional[float] = None


@dataclass
class RunReport:
    mode: str
    config: dict
    steps: list
    summary: dict
    wall_s: float
    avar_size: int
    events: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "config": self.config,
            "summary": self.summary,
            "wall_s": self.wall_s,
            "avar_size": self.avar_size,
            "steps": [r.to_dict() for r in self.steps],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        obj = json.loads(text)
        return cls(
            mode=obj["mode"],
            config=obj["config"],
            steps=[StepReport.from_dict(d) for d in obj["steps"]],
            summary=obj["summary"],
            wall_s=obj["wall_s"],
            avar_size=obj["avar_size"],
        )


# ---------------------------------------------------------------------------
# World


class World:
    """Mutable run state shared across steps: AVAR, agent, budget, streams."""

    def __init__(self, config: RunConfig, source, prioritizer,
                 analyst: Optional[Analyst] = None,
                 gate: Optional[Callable[[], None]] = None):
        self.config = config
        self.source = source
        self.prioritizer = prioritizer
        if getattr(source, "scripted", False) and len(source.batches) < config.steps:
            raise ValueError(
                f"scripted source has {len(source.batches)} batches for {config.steps} steps"
            )
        self.rng_arrivals = substream(config.seed, "arrivals")
        self.rng_stream = substream(config.seed, "stream")
        self.rng_oracle = substream(config.seed, "oracle")
        self.avar = Avar(quantization_decimals=config.quantization_decimals)
        self.budget = Budget(step_minutes=config.step_minutes,
                             review_fraction=config.review_fraction)
        if analyst is None:
            analyst = SimulatedAnalyst(ReviewCosts(), self.budget, charge_by=config.charge_by)
        else:
            analyst.budget = self.budget
        self.analyst = analyst
        self.gate = gate
        self.agent: Optional[DeferralAgent] = None
        if config.mode in ("l2dhf", "drlhf_only"):
            agent_cfg = dataclasses.replace(config.agent, seed=config.seed)
            n_features = getattr(source, "feature_dim", None)
            if n_features is None:
                n_features = self._probe_feature_dim()
            self.agent = DeferralAgent(agent_cfg, n_features=n_features)
        self.reports: list[StepReport] = []
        self.events: list[AlertOutcome] = []
        self.analyst_wait = 0.0

    def _probe_feature_dim(self) -> int:
        if isinstance(self.source, DatasetSource):
            return self.source.dataset.feature_dim
        if isinstance(self.source, ScriptedSource):
            for batch in self.source.batches:
                for features, _ in batch:
                    return len(np.asarray(features))
        raise ValueError("cannot determine feature dimension from source")

    # -- stage 1 ---------------------------------------------------------------

    def _assign_priorities(self, alerts: list[Alert]) -> tuple[list[Alert], list[float]]:
        """Returns alerts with ai_priority set, plus per-alert confidences."""
        if not alerts:
            return [], []
        if isinstance(self.prioritizer, ConfusionMatrix):
            true_codes = np.array([a.true_priority.value for a in alerts])
            ai_codes = oracle_predict_batch(self.prioritizer, true_codes, self.rng_oracle)
            confidences = [1.0] * len(alerts)
            if self.config.mode == "l2d":
                # Simulated agreement vote: the Stage-1 draw is member one,
                # the rest of the ensemble redraws from the same row.
                extra = self.config.confidence_members - 1
                if extra > 0:
                    votes = np.stack([
                        oracle_predict_batch(self.prioritizer, true_codes, self.rng_oracle)
                        for _ in range(extra)
                    ])
                    agree = 1 + (votes == ai_codes).sum(axis=0)
                    confidences = (agree / self.config.confidence_members).tolist()
            assigned = [
                dataclasses.replace(a, ai_priority=Priority(int(c)))
                for a, c in zip(alerts, ai_codes)
            ]
            return assigned, confidences
        if isinstance(self.prioritizer, EnsembleConfig):
            assigned, confidences = [], []
            for a in alerts:
                p, conf = ensemble_predict(self.prioritizer, a, self.rng_oracle)
                assigned.append(dataclasses.replace(a, ai_priority=p))
                confidences.append(conf)
            return assigned, confidences
        raise TypeError(f"unsupported prioritizer: {type(self.prioritizer).__name__}")

    # -- stage 3 helpers ---------------------------------------------------------

    def _review(self, alert: Alert) -> Priority:
        t0 = time.perf_counter()
        try:
            verdict = self.analyst.review(alert)
        finally:
            self.analyst_wait += time.perf_counter() - t0
        return verdict.priority

    def _decide(self, alert: Alert, state, t: int, confidence: float) -> Action:
        if self.config.mode == "l2d":
            return Action.DEFER if confidence < self.config.l2d_threshold else Action.ACCEPT
        return self.agent.select_action(state, t)

    # -- one step ----------------------------------------------------------------

    def run_step(self, t: int) -> StepReport:
        if self.gate is not None:
            self.gate()
        started = time.perf_counter()
        self.analyst_wait = 0.0
        cfg = self.config

        if getattr(self.source, "scripted", False):
            alerts = self.source.draw_step(t)
        else:
            n = poisson_sample(cfg.lam, self.rng_arrivals)
            alerts = self.source.draw(n, t, self.rng_stream)

        alerts, confidences = self._assign_priorities(alerts)
        conf_by_id = {a.id: c for a, c in zip(alerts, confidences)}

        self.budget.reset()
        finalized: list[tuple[Alert, Optional[Priority]]] = []
        outcomes: list[AlertOutcome] = []
        stage2_resolved = 0
        processed = deferred = unprocessed = 0

        def log(alert: Alert, final: Optional[Priority], outcome: str, rw: Optional[float] = None):
            finalized.append((alert, final))
            if cfg.record_events:
                outcomes.append(AlertOutcome(
                    alert_id=alert.id, step=t, true_priority=alert.true_priority,
                    ai_priority=alert.ai_priority, final_priority=final,
                    outcome=outcome, reward=rw,
                ))

        if cfg.mode == "ai_only":
            for a in alerts:
                log(a, a.ai_priority, "accepted")
            stage3_alerts: list[Alert] = []
        else:
            pending = alerts
            if cfg.mode == "l2dhf":
                resolved, pending = self.avar.filter_stage(pending)
                stage2_resolved = len(resolved)
                for a, validated in resolved:
                    log(a, validated, "resolved")
            if cfg.exclude_normal_from_stage3:
                kept = []
                for a in pending:
                    if a.ai_priority == Priority.NORMAL:
                        log(a, Priority.NORMAL, "excluded")
                    else:
                        kept.append(a)
                pending = kept
            stage3_alerts = sorted(pending, key=lambda a: -a.ai_priority.value)

        queue = list(stage3_alerts)
        i = 0
        while i < len(queue):
            alert = queue[i]
            if not self.budget.has_budget():
                break
            if self.gate is not None:
                self.gate()
            state = None
            if self.agent is not None:
                state = self.agent.build_state(alert, alert.ai_priority, self.avar)
            action = self._decide(alert, state, t, conf_by_id[alert.id])
            if action == Action.ACCEPT:
                log(alert, alert.ai_priority, "accepted", 0.0)
                processed += 1
                if self.agent is not None:
                    self.agent.record_and_train(Transition(state, Action.ACCEPT, 0.0, state))
            else:
                try:
                    verdict = self._review(alert)
                except ReviewTimeoutError:
                    break  # current alert and the rest of the queue go unprocessed
                rw = reward(alert.ai_priority, verdict, True, cfg.agent.reward)
                log(alert, verdict, "deferred", rw)
                processed += 1
                deferred += 1
                if cfg.mode in ("l2dhf", "drlhf_only"):
                    self.avar.insert(alert.features, verdict)
                if self.agent is not None:
                    self.agent.record_and_train(
                        Transition(state, Action.DEFER, rw, state.with_transition(verdict))
                    )
            i += 1

        for alert in queue[i:]:
            unprocessed += 1
            final = None if cfg.mode == "drlhf_only" else alert.ai_priority
            log(alert, final, "unprocessed")

        report = self._tally(t, alerts, finalized, stage2_resolved, len(queue),
                             processed, deferred, unprocessed, started)
        self.reports.append(report)
        if cfg.record_events:
            self.events.extend(outcomes)
        return report

    def _tally(self, t, alerts, finalized, stage2_resolved, stage3,
               processed, deferred, unprocessed, started) -> StepReport:
        pred = [0] * len(PRIORITIES)
        correct = [0] * len(PRIORITIES)
        true = [0] * len(PRIORITIES)
        mis = [0] * len(PRIORITIES)
        fp = fn = 0
        for a in alerts:
            true[a.true_priority.value] += 1
        for a, final in finalized:
            if final is None:
                continue
            pred[final.value] += 1
            if final == a.true_priority:
                correct[final.value] += 1
            else:
                mis[a.true_priority.value] += 1
                if a.true_priority == Priority.NORMAL:
                    fp += 1
                elif final == Priority.NORMAL:
                    fn += 1
        wall_ms = max(0.0, (time.perf_counter() - started - self.analyst_wait) * 1000.0)
        return StepReport(
            step=t, arrivals=len(alerts), stage2_resolved=stage2_resolved,
            stage3=stage3, processed=processed, deferred=deferred,
            unprocessed=unprocessed, fp=fp, fn=fn,
            pred=tuple(pred), correct=tuple(correct), true=tuple(true), mis=tuple(mis),
            wall_ms=wall_ms,
        )


def run(config: RunConfig, source, prioritizer, analyst: Optional[Analyst] = None,
        gate: Optional[Callable[[], None]] = None,
        on_step: Optional[Callable[[StepReport], None]] = None) -> RunReport:
    """Execute a full run; AVAR and agent persist across steps, budget resets."""
    world = World(config, source, prioritizer, analyst=analyst, gate=gate)
    started = time.perf_counter()
    for t in range(config.steps):
        report = world.run_step(t)
        if on_step is not None:
            on_step(report)
    wall_s = time.perf_counter() - started
    report = RunReport(
        mode=config.mode,
        config=config.to_dict(),
        steps=world.reports,
        summary=summarize_run(world.reports),
        wall_s=wall_s,
        avar_size=len(world.avar),
        events=world.events,
    )
    report.world = world  # handy for tests and the CLI's artifact dump
    return report
