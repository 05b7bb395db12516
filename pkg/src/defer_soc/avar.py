"""Analyst-Validated Alert Repository.

Five per-category storages of validated alerts plus an exact-match index
over quantized feature vectors.  Continuous features "match" when equal
after fixed-decimal quantization; mean-distance state codes use the raw
stored vectors.
"""

from __future__ import annotations

import json
from typing import Iterable, Optional

import numpy as np

from .domain import Alert, PRIORITIES, Priority, UNKNOWN


class AvarCapacityError(RuntimeError):
    pass


def quantize(features, decimals: int = 3) -> np.ndarray:
    """Round half-away-from-zero to `decimals` places; -0.0 normalized."""
    x = np.asarray(features, dtype=np.float64)
    scale = 10.0 ** decimals
    q = np.sign(x) * np.floor(np.abs(x) * scale + 0.5) / scale
    return q + 0.0


class _Storage:
    """One category's entries; numpy views rebuilt lazily after writes."""

    def __init__(self):
        self.raw: list[np.ndarray] = []
        self.quant: list[tuple] = []
        self._raw_mat: Optional[np.ndarray] = None
        self._quant_mat: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.raw)

    def add(self, raw: np.ndarray, quant: tuple):
        self.raw.append(raw)
        self.quant.append(quant)
        self._raw_mat = self._quant_mat = None

    def remove(self, quant: tuple):
        i = self.quant.index(quant)
        del self.raw[i]
        del self.quant[i]
        self._raw_mat = self._quant_mat = None

    def raw_matrix(self) -> np.ndarray:
        if self._raw_mat is None:
            self._raw_mat = np.array(self.raw, dtype=np.float64)
        return self._raw_mat

    def quant_matrix(self) -> np.ndarray:
        if self._quant_mat is None:
            self._quant_mat = np.array(self.quant, dtype=np.float64)
        return self._quant_mat


class Avar:
    """Validated-alert store: category storages + quantized-vector index."""

    def __init__(self, quantization_decimals: int = 3, max_entries: Optional[int] = None):
        if quantization_decimals < 0:
            raise ValueError("quantization_decimals must be >= 0")
        self.quantization_decimals = quantization_decimals
        self.max_entries = max_entries
        self.storages: dict[Priority, _Storage] = {p: _Storage() for p in PRIORITIES}
        self.index: dict[tuple, Priority] = {}

    def __len__(self) -> int:
        return len(self.index)

    def _key(self, features) -> tuple:
        return tuple(quantize(features, self.quantization_decimals).tolist())

    def insert(self, features, analyst_priority: Priority):
        """Store a validated alert; same quantized vector overwrites in place."""
        analyst_priority = Priority(analyst_priority)
        key = self._key(features)
        old = self.index.get(key)
        if old is not None:
            if old == analyst_priority:
                return
            self.storages[old].remove(key)
        elif self.max_entries is not None and len(self.index) >= self.max_entries:
            raise AvarCapacityError(f"AVAR is full ({self.max_entries} entries)")
        self.index[key] = analyst_priority
        self.storages[analyst_priority].add(
            np.asarray(features, dtype=np.float64).copy(), key
        )

    def lookup(self, features) -> Optional[Priority]:
        return self.index.get(self._key(features))

    def filter_stage(self, alerts: Iterable[Alert]) -> tuple[list[tuple[Alert, Priority]], list[Alert]]:
        """Split alerts into (already-validated, forwarded), order preserved."""
        resolved: list[tuple[Alert, Priority]] = []
        forwarded: list[Alert] = []
        for a in alerts:
            if a.ai_priority is None:
                raise ValueError(f"alert {a.id} reached Stage 2 without an ai_priority")
            hit = self.lookup(a.features)
            if hit is None:
                forwarded.append(a)
            else:
                resolved.append((a, hit))
        return resolved, forwarded

    # -- state-element readers ------------------------------------------------

    def feature_match_code(self, feature_index: int, value: float) -> int:
        """Category code if exactly one storage matches on this coordinate, else 10."""
        qv = float(quantize(value))
        hit: Optional[Priority] = None
        for p in PRIORITIES:
            s = self.storages[p]
            if len(s) and np.any(s.quant_matrix()[:, feature_index] == qv):
                if hit is not None:
                    return UNKNOWN
                hit = p
        return hit.value if hit is not None else UNKNOWN

    def feature_match_codes(self, subset: Iterable[int], features_matrix: np.ndarray) -> np.ndarray:
        """Batch feature_match_code: rows of `features_matrix` x `subset` columns."""
        subset = list(subset)
        x = np.atleast_2d(np.asarray(features_matrix, dtype=np.float64))
        qx = quantize(x[:, subset], self.quantization_decimals)
        codes = np.full(qx.shape, UNKNOWN, dtype=np.int64)
        match_count = np.zeros(qx.shape, dtype=np.int64)
        for p in PRIORITIES:
            s = self.storages[p]
            if not len(s):
                continue
            qm = s.quant_matrix()[:, subset]
            for j in range(len(subset)):
                hits = np.isin(qx[:, j], qm[:, j])
                codes[hits & (match_count[:, j] == 0), j] = p.value
                match_count[hits, j] += 1
        codes[match_count >= 2] = UNKNOWN
        return codes

    def nearest_category_code(self, features) -> int:
        """Category with strictly smallest mean distance; ties or empty → 10."""
        return int(self.nearest_category_codes(np.atleast_2d(features))[0])

    def nearest_category_codes(self, features_matrix: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features_matrix, dtype=np.float64))
        means = np.full((len(x), len(PRIORITIES)), np.inf)
        for p in PRIORITIES:
            s = self.storages[p]
            if not len(s):
                continue
            diff = x[:, None, :] - s.raw_matrix()[None, :, :]
            means[:, p.value] = np.sqrt(np.sum(diff * diff, axis=2)).mean(axis=1)
        codes = np.full(len(x), UNKNOWN, dtype=np.int64)
        best = means.min(axis=1)
        finite = np.isfinite(best)
        unique = (means == best[:, None]).sum(axis=1) == 1
        ok = finite & unique
        codes[ok] = means[ok].argmin(axis=1)
        return codes

    # -- persistence -----------------------------------------------------------

    def dump_jsonl(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            for p in PRIORITIES:
                for raw in self.storages[p].raw:
                    fh.write(json.dumps({"f": raw.tolist(), "p": p.value}) + "\n")

    @classmethod
    def load_jsonl(cls, path: str, quantization_decimals: int = 3,
                   max_entries: Optional[int] = None) -> "Avar":
        avar = cls(quantization_decimals=quantization_decimals, max_entries=max_entries)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                avar.insert(np.array(obj["f"], dtype=np.float64), Priority(obj["p"]))
        return avar
