"""Dataset loading and preparation.

Covers the offline half of a run: CSV ingestion with CVSS-to-severity
mapping, PCA fit/apply (cyclic Jacobi on the sample covariance), synthetic
labeled alert pools, and seeded splits.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import PRIORITIES, Priority
from .rng import substream

MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "-"}
MAX_ONE_HOT_CARDINALITY = 64
SPARSE_COLUMN_THRESHOLD = 0.5


class IngestError(ValueError):
    pass


@dataclass
class Dataset:
    """Numeric feature matrix plus severity labels."""

    features: np.ndarray  # (n, feature_dim) float64
    labels: np.ndarray  # (n,) int codes 0..4
    name: str = "dataset"
    dropped_rows: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise IngestError("features and labels must align row-for-row")
        bad = set(np.unique(self.labels)) - {p.value for p in PRIORITIES}
        if bad:
            raise IngestError(f"invalid label codes: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, Priority]:
        return self.features[i], Priority(int(self.labels[i]))


def map_cvss(score: float) -> Priority:
    """Map a CVSS v3.x base score to its qualitative severity band.

    Bands: 0.0 none, 0.1-3.9 low, 4.0-6.9 medium, 7.0-8.9 high,
    9.0-10.0 critical.  Cuts sit halfway between adjacent band edges so
    scores off the 0.1 grid still map monotonically.
    """
    if not (0.0 <= score <= 10.0) or math.isnan(score):
        raise IngestError(f"CVSS score out of range [0, 10]: {score}")
    if score < 0.05:
        return Priority.NORMAL
    if score < 3.95:
        return Priority.LOW
    if score < 6.95:
        return Priority.MEDIUM
    if score < 8.95:
        return Priority.HIGH
    return Priority.CRITICAL


def _parse_label(token: str, label_kind: str) -> Priority:
    if label_kind == "cvss_score":
        return map_cvss(float(token))
    if label_kind == "category":
        token = token.strip()
        if token.lstrip("+-").isdigit():
            return Priority(int(token))
        return Priority.from_label(token)
    raise IngestError(f"unknown label_kind: {label_kind!r}")


def load_csv(
    path: str,
    label_column: str,
    label_kind: str = "category",
    feature_columns: Optional[Sequence[str]] = None,
    one_hot_columns: Sequence[str] = (),
    drop_sparse_columns: bool = False,
    name: Optional[str] = None,
) -> Dataset:
    """Load an RFC-4180 CSV with a header row into a Dataset.

    Rows with unparseable numeric cells (or missing one-hot/label cells) are
    dropped and counted in ``Dataset.dropped_rows``.  With
    ``drop_sparse_columns`` set, feature columns that are missing in more
    than half the rows are excluded before row-level parsing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row required") from None
        raw_rows = list(reader)

    if label_column not in header:
        raise IngestError(f"{path}: missing label column {label_column!r}")
    if not raw_rows:
        raise IngestError(f"{path}: no data rows")
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise IngestError(f"{path}: ragged row {i + 2} ({len(row)} fields, expected {len(header)})")

    col_index = {c: j for j, c in enumerate(header)}
    one_hot = list(one_hot_columns)
    if feature_columns is None:
        feature_columns = [c for c in header if c != label_column]
    unknown = [c for c in list(feature_columns) + one_hot if c not in col_index]
    if unknown:
        raise IngestError(f"{path}: unknown columns {unknown}")
    numeric_cols = [c for c in feature_columns if c not in one_hot and c != label_column]

    def missing(tok: str) -> bool:
        return tok.strip().lower() in MISSING_TOKENS

    if drop_sparse_columns:
        kept = []
        for c in numeric_cols:
            j = col_index[c]
            miss = sum(1 for row in raw_rows if missing(row[j]))
            if miss / len(raw_rows) <= SPARSE_COLUMN_THRESHOLD:
                kept.append(c)
        numeric_cols = kept

    # One-hot category inventories, sorted for determinism.
    categories: dict[str, list[str]] = {}
    for c in one_hot:
        j = col_index[c]
        values = sorted({row[j].strip() for row in raw_rows if not missing(row[j])})
        if len(values) > MAX_ONE_HOT_CARDINALITY:
            raise IngestError(
                f"{path}: column {c!r} has {len(values)} categories, cap is {MAX_ONE_HOT_CARDINALITY}"
            )
        categories[c] = values

    feats: list[list[float]] = []
    labels: list[int] = []
    dropped = 0
    label_j = col_index[label_column]
    for row in raw_rows:
        try:
            vec: list[float] = []
            for c in numeric_cols:
                tok = row[col_index[c]]
                if missing(tok):
                    raise ValueError("missing cell")
                vec.append(float(tok))
            for c in one_hot:
                tok = row[col_index[c]].strip()
                if missing(tok):
                    raise ValueError("missing category")
                onehot = [0.0] * len(categories[c])
                onehot[categories[c].index(tok)] = 1.0
                vec.extend(onehot)
            label = _parse_label(row[label_j], label_kind)
        except (ValueError, KeyError):
            dropped += 1
            continue
        feats.append(vec)
        labels.append(label.value)

    if not feats:
        raise IngestError(f"{path}: zero usable rows after dropping {dropped}")
    return Dataset(
        features=np.array(feats, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        name=name or path,
        dropped_rows=dropped,
    )


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,), non-increasing

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.explained_variance_ratio = np.asarray(self.explained_variance_ratio, dtype=np.float64)
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(len(self.components)), atol=1e-6):
            raise IngestError("PCA components are not orthonormal")
        evr = self.explained_variance_ratio
        if np.any(np.diff(evr) > 1e-12) or evr.sum() > 1 + 1e-9:
            raise IngestError("explained variance ratios must be non-increasing and sum to <= 1")

    @property
    def k(self) -> int:
        return len(self.components)

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "evr": self.explained_variance_ratio.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        obj = json.loads(text)
        return cls(
            mean=np.array(obj["mean"]),
            components=np.array(obj["components"]),
            explained_variance_ratio=np.array(obj["evr"]),
        )


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.  Sweeps rotate
    away every off-diagonal pair until the off-diagonal Frobenius mass drops
    below ``tol`` relative to the matrix norm.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise IngestError("jacobi_eigh expects a square matrix")
    if not np.allclose(a, a.T, atol=1e-10):
        raise IngestError("jacobi_eigh expects a symmetric matrix")
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p = a[:, p].copy()
                rot_q = a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p = a[p, :].copy()
                rot_q = a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = v[:, p].copy()
                rot_q = v[:, q].copy()
                v[:, p] = c * rot_p - s * rot_q
                v[:, q] = s * rot_p + c * rot_q
    return np.diag(a).copy(), v


def fit_pca(data: np.ndarray, k: int) -> PcaModel:
    """Top-k eigenpairs of the sample covariance (denominator n-1)."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise IngestError("fit_pca needs a 2-D matrix with at least 2 rows")
    d = x.shape[1]
    if k > d or k < 1:
        raise IngestError(f"k={k} out of range for feature_dim={d}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (len(x) - 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        raise IngestError("degenerate data: zero covariance")
    eigvals, eigvecs = jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    components = eigvecs[:, :k].T.copy()
    # Deterministic sign: largest-magnitude coordinate made positive.
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    evr = eigvals[:k] / total
    return PcaModel(mean=mean, components=components, explained_variance_ratio=evr)


def apply_pca(model: PcaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise IngestError(f"dimension mismatch: got {x.shape[-1]}, expected {model.mean.shape[0]}")
    return (x - model.mean) @ model.components.T


def transform_dataset(model: PcaModel, d: Dataset) -> Dataset:
    return Dataset(
        features=apply_pca(model, d.features),
        labels=d.labels.copy(),
        name=f"{d.name}|pca{model.k}",
        dropped_rows=d.dropped_rows,
    )


# ---------------------------------------------------------------------------
# Synthetic alert pools


@dataclass
class SynthConfig:
    """Gaussian-blob alert pool: one centroid per severity category."""

    category_proportions: dict[Priority, float] = field(
        default_factory=lambda: {p: 0.2 for p in PRIORITIES}
    )
    centroid_separation: float = 8.0
    noise_sigma: float = 1.0
    feature_dim: int = 12
    seed: int = 0

    def __post_init__(self):
        props = {Priority(p): float(v) for p, v in self.category_proportions.items()}
        if any(v < 0 for v in props.values()):
            raise IngestError("category proportions must be non-negative")
        total = sum(props.values())
        if abs(total - 1.0) > 1e-9:
            raise IngestError(f"category proportions must sum to 1, got {total}")
        self.category_proportions = props
        if self.feature_dim < len(PRIORITIES):
            raise IngestError(
                f"feature_dim must be >= {len(PRIORITIES)} to place equidistant centroids"
            )

    def centroids(self) -> np.ndarray:
        """One centroid per category on scaled basis axes; all pairwise
        distances equal centroid_separation exactly."""
        m = np.zeros((len(PRIORITIES), self.feature_dim))
        scale = self.centroid_separation / math.sqrt(2.0)
        for p in PRIORITIES:
            m[p.value, p.value] = scale
        return m


def synth_generate(cfg: SynthConfig, n: int) -> Dataset:
    """Draw n labeled alerts from the configured blob mixture; deterministic per seed."""
    if n < 1:
        raise IngestError("n must be >= 1")
    rng = substream(cfg.seed, "synth")
    probs = np.array([cfg.category_proportions.get(p, 0.0) for p in PRIORITIES])
    labels = rng.choice(len(PRIORITIES), size=n, p=probs)
    centroids = cfg.centroids()
    feats = centroids[labels] + cfg.noise_sigma * rng.standard_normal((n, cfg.feature_dim))
    return Dataset(features=feats, labels=labels, name=f"synth(seed={cfg.seed})")


def split(d: Dataset, fractions: Sequence[float], seed: int) -> list[Dataset]:
    """Disjoint seeded partition with sizes within +/-1 of proportional."""
    if len(d) == 0:
        raise IngestError("cannot split an empty dataset")
    fracs = [float(f) for f in fractions]
    if any(f <= 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
        raise IngestError("fractions must be positive and sum to 1")
    rng = substream(seed, "shuffle")
    order = rng.permutation(len(d))
    bounds = [0]
    acc = 0.0
    for f in fracs:
        acc += f
        bounds.append(int(round(acc * len(d))))
    bounds[-1] = len(d)
    parts = []
    for i in range(len(fracs)):
        idx = order[bounds[i] : bounds[i + 1]]
        parts.append(
            Dataset(
                features=d.features[idx],
                labels=d.labels[idx],
                name=f"{d.name}[{i}]",
            )
        )
    return parts
