"""Analyst model: verdicts for deferred alerts under a per-step time budget.

The simulated analyst is a ground-truth oracle; a live implementation
satisfies the same review contract by blocking on a console verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .domain import Alert, PRIORITIES, Priority

DEFAULT_MINUTES = {
    Priority.CRITICAL: 4.5,
    Priority.HIGH: 3.5,
    Priority.MEDIUM: 2.0,
    Priority.LOW: 1.5,
    Priority.NORMAL: 1.0,
}


class ReviewTimeoutError(RuntimeError):
    """A live verdict did not arrive in time; treat like budget exhaustion."""


@dataclass(frozen=True)
class ReviewCosts:
    minutes: dict = field(default_factory=lambda: dict(DEFAULT_MINUTES))

    def __post_init__(self):
        m = {Priority(k): float(v) for k, v in self.minutes.items()}
        if set(m) != set(PRIORITIES):
            raise ValueError("review costs must cover all five categories")
        ordered = [m[p] for p in PRIORITIES]
        if any(c <= 0 for c in ordered):
            raise ValueError("review costs must be positive")
        if any(a >= b for a, b in zip(ordered, ordered[1:])):
            raise ValueError("review costs must increase with severity")
        object.__setattr__(self, "minutes", m)

    def cost(self, p: Priority) -> float:
        return self.minutes[Priority(p)]

    @property
    def max_cost(self) -> float:
        return max(self.minutes.values())


@dataclass
class Budget:
    step_minutes: float = 60.0
    review_fraction: float = 0.8
    remaining: float = 0.0

    def __post_init__(self):
        if self.step_minutes <= 0 or not 0.0 < self.review_fraction <= 1.0:
            raise ValueError("step_minutes must be positive and review_fraction in (0, 1]")

    @property
    def per_step(self) -> float:
        return self.step_minutes * self.review_fraction

    def reset(self):
        self.remaining = self.per_step

    def has_budget(self) -> bool:
        return self.remaining > 0.0

    def charge(self, minutes: float):
        """Deduct review time; the final review may overdraw, then clamp to 0."""
        if not self.has_budget():
            raise RuntimeError("review charged with exhausted budget")
        self.remaining = max(0.0, self.remaining - minutes)


def reset_budget(b: Budget):
    b.reset()


def has_budget(b: Budget) -> bool:
    return b.has_budget()


@dataclass(frozen=True)
class AnalystVerdict:
    alert_id: int
    priority: Priority
    minutes_charged: float


class Analyst:
    """Review contract: produce a verdict and charge the shared budget.

    charge_by selects whose category sets the review cost: the analyst's
    verdict (default: time follows what the alert actually is) or the AI's.
    """

    def __init__(self, costs: Optional[ReviewCosts] = None, budget: Optional[Budget] = None,
                 charge_by: str = "analyst"):
        if charge_by not in ("analyst", "ai"):
            raise ValueError("charge_by must be 'analyst' or 'ai'")
        self.costs = costs or ReviewCosts()
        self.budget = budget or Budget()
        self.charge_by = charge_by

    def decide(self, alert: Alert) -> Priority:
        raise NotImplementedError

    def review(self, alert: Alert) -> AnalystVerdict:
        assigned = self.decide(alert)
        basis = assigned if self.charge_by == "analyst" else alert.ai_priority
        minutes = self.costs.cost(basis)
        self.budget.charge(minutes)
        return AnalystVerdict(alert_id=alert.id, priority=assigned, minutes_charged=minutes)


class SimulatedAnalyst(Analyst):
    """Exact oracle: the verdict is always the ground-truth priority."""

    def decide(self, alert: Alert) -> Priority:
        return alert.true_priority
