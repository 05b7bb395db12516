"""Learning-to-defer alert prioritisation for security operations desks.

The package wires a predictive prioritiser, a validated-alert repository,
and a dueling double-DQN deferral agent into a discrete-time SOC simulator,
with a CLI and a live review service on top.
"""

from .domain import Action, Alert, Priority, RewardParams, UNKNOWN
from .rng import substream

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Alert",
    "Priority",
    "RewardParams",
    "UNKNOWN",
    "substream",
    "__version__",
]
