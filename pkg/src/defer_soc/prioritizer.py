"""Stage-1 predictive AI.

Two interchangeable backends: a confusion-matrix oracle whose per-category
accuracy is calibrated explicitly, and a Gaussian naive Bayes ensemble
trained from data.  Both yield a Priority plus an agreement confidence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .domain import Alert, N_PRIORITIES, PRIORITIES, Priority
from .ingest import Dataset

VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic P(predicted | true), rows and columns in code order."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (N_PRIORITIES, N_PRIORITIES):
            raise ValueError(f"confusion matrix must be {N_PRIORITIES}x{N_PRIORITIES}")
        if np.any(m < 0):
            raise ValueError("confusion matrix entries must be non-negative")
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"confusion matrix rows must sum to 1, got {sums}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_cum", np.cumsum(m, axis=1))

    def row(self, true_priority: Priority) -> np.ndarray:
        return self.matrix[true_priority.value]

    @classmethod
    def identity(cls) -> "ConfusionMatrix":
        return cls(np.eye(N_PRIORITIES))

    @classmethod
    def from_rows(cls, rows: dict) -> "ConfusionMatrix":
        m = np.zeros((N_PRIORITIES, N_PRIORITIES))
        for key, vec in rows.items():
            p = key if isinstance(key, Priority) else Priority.from_label(str(key))
            m[p.value] = np.asarray(vec, dtype=np.float64)
        return cls(m)

    def to_json(self) -> str:
        return json.dumps({p.label: self.matrix[p.value].tolist() for p in PRIORITIES})

    @classmethod
    def from_json(cls, text: str) -> "ConfusionMatrix":
        return cls.from_rows(json.loads(text))


def oracle_predict(cm: ConfusionMatrix, true_priority: Priority, rng: np.random.Generator) -> Priority:
    """Sample a predicted Priority from the row for the true category."""
    cum = cm._cum[true_priority.value]
    j = int(np.searchsorted(cum, rng.random(), side="right"))
    return Priority(min(j, N_PRIORITIES - 1))


def oracle_predict_batch(cm: ConfusionMatrix, true_codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized oracle_predict: one uniform per alert, inverse-CDF per row."""
    true_codes = np.asarray(true_codes, dtype=np.int64)
    cum = cm._cum[true_codes]
    u = rng.random(len(true_codes))
    codes = (cum < u[:, None]).sum(axis=1)
    return np.minimum(codes, N_PRIORITIES - 1)


# ---------------------------------------------------------------------------
# Gaussian naive Bayes


@dataclass
class NbModel:
    priors: np.ndarray  # (5,)
    means: np.ndarray  # (5, d)
    variances: np.ndarray  # (5, d), floored

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if abs(self.priors.sum() - 1.0) > 1e-9:
            raise ValueError("class priors must sum to 1")
        if np.any(self.variances < VARIANCE_FLOOR):
            raise ValueError(f"variances below floor {VARIANCE_FLOOR}")

    @property
    def feature_dim(self) -> int:
        return self.means.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "priors": self.priors.tolist(),
                "means": self.means.tolist(),
                "variances": self.variances.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NbModel":
        obj = json.loads(text)
        return cls(
            priors=np.array(obj["priors"]),
            means=np.array(obj["means"]),
            variances=np.array(obj["variances"]),
        )


def nb_fit(train: Dataset) -> NbModel:
    """Empirical priors plus per-class per-feature Gaussian moments."""
    if len(train) == 0:
        raise ValueError("empty training set")
    d = train.feature_dim
    priors = np.zeros(N_PRIORITIES)
    means = np.zeros((N_PRIORITIES, d))
    variances = np.full((N_PRIORITIES, d), VARIANCE_FLOOR)
    for p in PRIORITIES:
        mask = train.labels == p.value
        n = int(mask.sum())
        if n == 0:
            continue
        priors[p.value] = n / len(train)
        rows = train.features[mask]
        means[p.value] = rows.mean(axis=0)
        variances[p.value] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
    return NbModel(priors=priors, means=means, variances=variances)


def nb_log_posterior(model: NbModel, x: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior per class; -inf for zero-prior classes."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise ValueError(f"feature dimension mismatch: {x.shape} vs ({model.feature_dim},)")
    with np.errstate(divide="ignore"):
        log_priors = np.log(model.priors)
    log_lik = -0.5 * np.sum(
        np.log(2.0 * np.pi * model.variances) + (x - model.means) ** 2 / model.variances,
        axis=1,
    )
    return log_priors + log_lik


def nb_predict(model: NbModel, x: np.ndarray) -> Priority:
    """Argmax class; exact ties break toward higher severity."""
    scores = nb_log_posterior(model, x)
    best = np.max(scores)
    for code in range(N_PRIORITIES - 1, -1, -1):
        if scores[code] == best:
            return Priority(code)
    raise AssertionError("unreachable: max must be attained")


# ---------------------------------------------------------------------------
# Ensemble

Member = Union[ConfusionMatrix, NbModel]


@dataclass
class EnsembleConfig:
    members: list = field(default_factory=list)
    agreement_threshold: float = 0.75

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if not 0.0 < self.agreement_threshold <= 1.0:
            raise ValueError("agreement_threshold must be in (0, 1]")


def _member_predict(member: Member, alert: Alert, rng: np.random.Generator) -> Priority:
    if isinstance(member, ConfusionMatrix):
        return oracle_predict(member, alert.true_priority, rng)
    if isinstance(member, NbModel):
        return nb_predict(member, alert.features)
    raise TypeError(f"unsupported ensemble member: {type(member).__name__}")


def ensemble_predict(cfg: EnsembleConfig, alert: Alert, rng: np.random.Generator) -> tuple[Priority, float]:
    """Modal member prediction (ties break severe) and its agreement share."""
    votes = [_member_predict(m, alert, rng) for m in cfg.members]
    counts = np.bincount([v.value for v in votes], minlength=N_PRIORITIES)
    top = counts.max()
    for code in range(N_PRIORITIES - 1, -1, -1):
        if counts[code] == top:
            return Priority(code), top / len(votes)
    raise AssertionError("unreachable: max must be attained")


def nb_bootstrap_ensemble(train: Dataset, members: int, rng: np.random.Generator) -> EnsembleConfig:
    """Bootstrap-resampled NB members; a data-driven stand-in ensemble."""
    if members < 1:
        raise ValueError("members must be >= 1")
    fitted = []
    for _ in range(members):
        idx = rng.integers(0, len(train), size=len(train))
        fitted.append(nb_fit(Dataset(train.features[idx], train.labels[idx], name=train.name)))
    return EnsembleConfig(members=fitted)


def empirical_confusion(true_codes: np.ndarray, pred_codes: np.ndarray) -> ConfusionMatrix:
    """Row-normalized confusion counts; absent true classes get identity rows."""
    m = np.zeros((N_PRIORITIES, N_PRIORITIES))
    for t, p in zip(np.asarray(true_codes), np.asarray(pred_codes)):
        m[int(t), int(p)] += 1.0
    for c in range(N_PRIORITIES):
        s = m[c].sum()
        if s > 0:
            m[c] /= s
        else:
            m[c, c] = 1.0
    return ConfusionMatrix(m)
