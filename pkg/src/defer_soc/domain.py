"""Core vocabulary shared by every stage of the deferral pipeline.

Severity runs Normal=0 .. Critical=4.  The literal 10 (``UNKNOWN``) is not a
priority: it only ever appears inside agent state vectors to mark ambiguous
or missing information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np


class Priority(IntEnum):
    """Five-level alert severity; ordering by code is the severity ordering."""

    NORMAL = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3
    CRITICAL = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Priority":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown priority label: {label!r}") from None

    @classmethod
    def from_code(cls, code: int) -> "Priority":
        if code == UNKNOWN:
            raise ValueError("state code 10 (unknown) is not a priority")
        return cls(code)


PRIORITIES = tuple(Priority)  # ascending severity
N_PRIORITIES = len(PRIORITIES)

#: Sentinel state code for "no match / ambiguous"; never a Priority.
UNKNOWN = 10

STATE_CODES = frozenset(p.value for p in PRIORITIES) | {UNKNOWN}


def is_state_code(value: int) -> bool:
    return value in STATE_CODES


class Action(IntEnum):
    """Deferral decision: accept the machine priority or defer to the analyst."""

    ACCEPT = 0
    DEFER = 1


def severity_order(a: Priority, b: Priority) -> int:
    """Total severity order: -1 if a below b, 0 if equal, +1 if a above b."""
    return (a.value > b.value) - (a.value < b.value)


@dataclass(frozen=True)
class Alert:
    """One alert as seen by the pipeline.

    ``true_priority`` is ground truth; only the analyst model and the metrics
    layer may read it.  ``ai_priority`` is set in Stage 1, ``final_priority``
    once the alert has left the pipeline (Stage 2 match, Stage 3 decision, or
    marked unprocessed).
    """

    id: int
    features: np.ndarray
    true_priority: Priority
    arrival_step: int
    ai_priority: Optional[Priority] = None
    final_priority: Optional[Priority] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class RewardParams:
    """Constants of the deferral reward.

    ``q`` penalises deferring an already-correct priority; ``z`` is the base
    bonus for a useful deferral and ``f < g < h < w`` scale it up with the
    severity the analyst assigns (Low..Critical).
    """

    z: float = 1.0
    q: float = 5.0
    f: float = 2.0
    g: float = 4.0
    h: float = 6.0
    w: float = 8.0

    def __post_init__(self):
        vals = (self.z, self.q, self.f, self.g, self.h, self.w)
        if any(v <= 0 for v in vals):
            raise ValueError("reward parameters must all be positive")
        if not (self.f < self.g < self.h < self.w):
            raise ValueError("reward parameters must satisfy f < g < h < w")

    def severity_bonus(self, analyst: Priority) -> float:
        """Extra reward (beyond z) for correcting an alert of this severity."""
        return {
            Priority.CRITICAL: self.w,
            Priority.HIGH: self.h,
            Priority.MEDIUM: self.g,
            Priority.LOW: self.f,
            Priority.NORMAL: 0.0,
        }[analyst]
