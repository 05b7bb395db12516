"""Run metrics: per-step reports, category accuracies, misprioritisation
counts, false positives/negatives, and the Mann-Whitney U significance test
(exact for small samples, tie-corrected normal approximation otherwise).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, Optional, Sequence

from .domain import PRIORITIES, Priority

EXACT_MW_LIMIT = 400  # exact null enumeration while n1*n2 stays at or below this

CSV_CATEGORY_FIELDS = ("pred", "correct", "true", "mis")


@dataclass
class StepReport:
    """One simulated time step's tallies.

    Category tuples are in code order (normal .. critical): alerts finalized
    into the category (pred), of those how many were right (correct), arrivals
    whose ground truth is the category (true), and true-category alerts
    finalized elsewhere (mis).
    """

    step: int
    arrivals: int = 0
    stage2_resolved: int = 0
    stage3: int = 0
    processed: int = 0
    deferred: int = 0
    unprocessed: int = 0
    fp: int = 0
    fn: int = 0
    pred: tuple = (0, 0, 0, 0, 0)
    correct: tuple = (0, 0, 0, 0, 0)
    true: tuple = (0, 0, 0, 0, 0)
    mis: tuple = (0, 0, 0, 0, 0)
    wall_ms: float = 0.0

    def __post_init__(self):
        for name in ("pred", "correct", "true", "mis"):
            v = tuple(int(x) for x in getattr(self, name))
            if len(v) != len(PRIORITIES):
                raise ValueError(f"{name} must have {len(PRIORITIES)} entries")
            setattr(self, name, v)
        if any(c > p for c, p in zip(self.correct, self.pred)):
            raise ValueError("correct cannot exceed prioritised-as count")
        if self.deferred > self.processed:
            raise ValueError("deferred cannot exceed processed")

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "arrivals": self.arrivals,
            "stage2_resolved": self.stage2_resolved,
            "stage3": self.stage3,
            "processed": self.processed,
            "deferred": self.deferred,
            "unprocessed": self.unprocessed,
            "fp": self.fp,
            "fn": self.fn,
            "pred": list(self.pred),
            "correct": list(self.correct),
            "true": list(self.true),
            "mis": list(self.mis),
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepReport":
        return cls(**{**d, "pred": tuple(d["pred"]), "correct": tuple(d["correct"]),
                      "true": tuple(d["true"]), "mis": tuple(d["mis"])})


def csv_header() -> str:
    cols = ["step", "arrivals", "stage2_resolved", "stage3", "processed",
            "deferred", "unprocessed", "fp", "fn"]
    for p in PRIORITIES:
        cols.extend(f"{p.label}_{f}" for f in CSV_CATEGORY_FIELDS)
    cols.append("wall_ms")
    return ",".join(cols)


def csv_row(r: StepReport) -> str:
    vals = [r.step, r.arrivals, r.stage2_resolved, r.stage3, r.processed,
            r.deferred, r.unprocessed, r.fp, r.fn]
    for p in PRIORITIES:
        c = p.value
        vals.extend((r.pred[c], r.correct[c], r.true[c], r.mis[c]))
    return ",".join(str(v) for v in vals) + f",{r.wall_ms:.3f}"


def write_steps_csv(reports: Sequence[StepReport], path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_header() + "\n")
        for r in reports:
            fh.write(csv_row(r) + "\n")


def read_steps_csv(path: str) -> list[StepReport]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != csv_header():
            raise ValueError(f"{path}: unexpected steps.csv header")
        out = []
        for line in fh:
            parts = line.strip().split(",")
            ints = [int(v) for v in parts[:-1]]
            base, cats = ints[:9], ints[9:]
            per = {f: [] for f in CSV_CATEGORY_FIELDS}
            for c in range(len(PRIORITIES)):
                for i, f in enumerate(CSV_CATEGORY_FIELDS):
                    per[f].append(cats[c * 4 + i])
            out.append(StepReport(
                step=base[0], arrivals=base[1], stage2_resolved=base[2], stage3=base[3],
                processed=base[4], deferred=base[5], unprocessed=base[6],
                fp=base[7], fn=base[8],
                pred=tuple(per["pred"]), correct=tuple(per["correct"]),
                true=tuple(per["true"]), mis=tuple(per["mis"]),
                wall_ms=float(parts[-1]),
            ))
        return out


# ---------------------------------------------------------------------------
# Table metrics


def accuracy_series(reports: Iterable[StepReport], category: Priority) -> list[float]:
    """Per-step correct/pred ratios, skipping steps with no predictions."""
    c = Priority(category).value
    return [r.correct[c] / r.pred[c] for r in reports if r.pred[c] > 0]


def ap_accuracy(reports: Iterable[StepReport], category: Priority) -> Optional[float]:
    """Mean per-step accuracy for one category; None if never predicted."""
    series = accuracy_series(reports, category)
    if not series:
        return None
    return sum(series) / len(series)


def overall_accuracy_series(reports: Iterable[StepReport], include_normal: bool = False) -> list[float]:
    """Per-step overall ratios; Normal-predicted alerts excluded by default
    since a Normal-heavy mix would swamp the interesting categories."""
    skip = None if include_normal else Priority.NORMAL.value
    series = []
    for r in reports:
        num = sum(c for i, c in enumerate(r.correct) if i != skip)
        den = sum(p for i, p in enumerate(r.pred) if i != skip)
        if den > 0:
            series.append(num / den)
    return series


def overall_ap_accuracy(reports: Iterable[StepReport], include_normal: bool = False) -> Optional[float]:
    series = overall_accuracy_series(reports, include_normal)
    if not series:
        return None
    return sum(series) / len(series)


def misprioritisations(reports: Iterable[StepReport], category: Priority) -> int:
    c = Priority(category).value
    return sum(r.mis[c] for r in reports)


def false_pos_neg(pair_log: Iterable[tuple]) -> tuple[int, int]:
    """(fp, fn) from raw (true, final) pairs; unfinalized alerts are skipped."""
    fp = fn = 0
    for true, final in pair_log:
        if final is None:
            continue
        if true == Priority.NORMAL and final != Priority.NORMAL:
            fp += 1
        elif true != Priority.NORMAL and final == Priority.NORMAL:
            fn += 1
    return fp, fn


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """U for sample a: pairs where a wins, ties counted half."""
    wins = 0
    ties = 0
    for x in a:
        for y in b:
            if x > y:
                wins += 1
            elif x == y:
                ties += 1
    return wins + 0.5 * ties


def _normal_approx_p(a: Sequence[float], b: Sequence[float], u: float) -> float:
    """Tie-corrected normal approximation with continuity correction.

    When the pooled sample is tie-free an Edgeworth kurtosis term is added:
    the untied null is symmetric with excess kurtosis
    -(6/5)(n1^2+n2^2+n1n2+n1+n2) / (n1 n2 (n+1)), which cuts the worst-case
    error at n1,n2~8 from ~1e-2 to ~5e-4.  Tied nulls can be asymmetric
    (odd cumulants nonzero), where this term would overcorrect, so it is
    applied only to untied data.
    """
    n1, n2 = len(a), len(b)
    n = n1 + n2
    mu = n1 * n2 / 2.0
    pooled = sorted(list(a) + list(b))
    tie_term = 0.0
    i = 0
    while i < n:
        j = i
        while j < n and pooled[j] == pooled[i]:
            j += 1
        t = j - i
        tie_term += t ** 3 - t
        i = j
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    if tie_term == 0.0:
        g2 = -1.2 * (n1 * n1 + n2 * n2 + n1 * n2 + n1 + n2) / (n1 * n2 * (n + 1))
        phi = math.exp(-z * z / 2.0) / math.sqrt(2.0 * math.pi)
        p += 2.0 * phi * (g2 / 24.0) * (z ** 3 - 3.0 * z)
    return min(1.0, max(0.0, p))


def _exact_p(a: Sequence[float], b: Sequence[float], u: float) -> float:
    """Tie-aware exact two-sided p over all C(n1+n2, n1) assignments.

    Counts assignments by dynamic programming over distinct pooled values:
    state = (alerts assigned to sample A so far, accumulated 2U), weighted
    by the product of per-value binomial choices.
    """
    n1, n2 = len(a), len(b)
    pooled = sorted(list(a) + list(b))
    values: list[float] = []
    counts: list[int] = []
    for x in pooled:
        if values and x == values[-1]:
            counts[-1] += 1
        else:
            values.append(x)
            counts.append(1)

    max_u2 = 2 * n1 * n2
    # dist[s][u2] = number of weighted ways to pick s A-elements with 2U = u2
    dist = [{} for _ in range(n1 + 1)]
    dist[0][0] = 1
    total_below = 0
    for c in counts:
        new = [dict() for _ in range(n1 + 1)]
        for s in range(n1 + 1):
            if not dist[s]:
                continue
            for take in range(0, min(c, n1 - s) + 1):
                w = comb(c, take)
                du2 = 2 * take * (total_below - s) + take * (c - take)
                tgt = new[s + take]
                for u2, ways in dist[s].items():
                    key = u2 + du2
                    tgt[key] = tgt.get(key, 0) + ways * w
        dist = new
        total_below += c
    null = dist[n1]

    u2_obs = round(2.0 * u)
    d_obs = abs(u2_obs - n1 * n2)
    hits = sum(w for u2, w in null.items() if abs(u2 - n1 * n2) >= d_obs)
    return hits / comb(n1 + n2, n1)


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float],
                   method: str = "auto") -> tuple[float, float]:
    """U statistic (for sample_a) and two-sided p.

    method: auto (exact when n1*n2 <= 400), exact, or approx.
    """
    if len(sample_a) == 0 or len(sample_b) == 0:
        raise ValueError("both samples must be non-empty")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    u = _u_statistic(sample_a, sample_b)
    if method == "exact" or (method == "auto" and len(sample_a) * len(sample_b) <= EXACT_MW_LIMIT):
        return u, _exact_p(sample_a, sample_b, u)
    return u, _normal_approx_p(sample_a, sample_b, u)


def permutation_p(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Brute-force two-sided permutation p; test oracle for small samples."""
    n1 = len(sample_a)
    pooled = list(sample_a) + list(sample_b)
    mu2 = n1 * len(sample_b)  # 2*mu
    d_obs = abs(round(2.0 * _u_statistic(sample_a, sample_b)) - mu2)
    hits = 0
    total = 0
    idx = range(len(pooled))
    for pick in combinations(idx, n1):
        chosen = set(pick)
        a = [pooled[i] for i in pick]
        b = [pooled[i] for i in idx if i not in chosen]
        d = abs(round(2.0 * _u_statistic(a, b)) - mu2)
        hits += d >= d_obs
        total += 1
    return hits / total


# ---------------------------------------------------------------------------
# Aggregation


def summarize_run(reports: Sequence[StepReport]) -> dict:
    total = lambda name: sum(getattr(r, name) for r in reports)
    stage3 = total("stage3")
    out = {
        "steps": len(reports),
        "arrivals": total("arrivals"),
        "stage2_resolved": total("stage2_resolved"),
        "stage3": stage3,
        "processed": total("processed"),
        "deferred": total("deferred"),
        "unprocessed": total("unprocessed"),
        "fp": total("fp"),
        "fn": total("fn"),
        "processed_pct": 100.0 * total("processed") / stage3 if stage3 else None,
        "unprocessed_pct": 100.0 * total("unprocessed") / stage3 if stage3 else None,
        "wall_ms": sum(r.wall_ms for r in reports),
        "per_category": {},
        "overall_accuracy": overall_ap_accuracy(reports, include_normal=True),
        "overall_accuracy_without_normal": overall_ap_accuracy(reports, include_normal=False),
    }
    for p in PRIORITIES:
        c = p.value
        out["per_category"][p.label] = {
            "pred": sum(r.pred[c] for r in reports),
            "correct": sum(r.correct[c] for r in reports),
            "true": sum(r.true[c] for r in reports),
            "mis": sum(r.mis[c] for r in reports),
            "accuracy": ap_accuracy(reports, p),
        }
    return out


def aggregate(runs: dict) -> dict:
    """Summaries per run plus pairwise Mann-Whitney p on accuracy series.

    runs: name -> list[StepReport].  Step counts must match across runs.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    lengths = {name: len(reports) for name, reports in runs.items()}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"mismatched step counts: {lengths}")
    summary = {"runs": {name: summarize_run(r) for name, r in runs.items()}, "p_values": {}}
    names = sorted(runs)
    for i, na in enumerate(names):
        for nb in names[i + 1:]:
            cell: dict = {}
            for p in PRIORITIES:
                sa = accuracy_series(runs[na], p)
                sb = accuracy_series(runs[nb], p)
                cell[p.label] = mann_whitney_u(sa, sb)[1] if sa and sb else None
            sa = overall_accuracy_series(runs[na])
            sb = overall_accuracy_series(runs[nb])
            cell["overall"] = mann_whitney_u(sa, sb)[1] if sa and sb else None
            summary["p_values"][f"{na}|{nb}"] = cell
    return summary


def render_table(summary: dict) -> str:
    """Aligned plain-text view of an aggregate() summary."""
    lines = []
    header = ["run", "arrivals", "processed", "unprocessed", "deferred", "fp", "fn", "overall*"]
    header += [p.label for p in PRIORITIES]
    rows = [header]
    for name, s in summary["runs"].items():
        fmt = lambda v: "-" if v is None else (f"{v:.3f}" if isinstance(v, float) else str(v))
        row = [name, str(s["arrivals"]), str(s["processed"]), str(s["unprocessed"]),
               str(s["deferred"]), str(s["fp"]), str(s["fn"]),
               fmt(s["overall_accuracy_without_normal"])]
        row += [fmt(s["per_category"][p.label]["accuracy"]) for p in PRIORITIES]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    if summary["p_values"]:
        lines.append("")
        lines.append("Mann-Whitney two-sided p (accuracy series):")
        for pair, cell in summary["p_values"].items():
            vals = ", ".join(
                f"{k}={'-' if v is None else f'{v:.4f}'}" for k, v in cell.items()
            )
            lines.append(f"  {pair}: {vals}")
    return "\n".join(lines)


def dump_summary(summary: dict, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
