import math

import pytest

from defer_soc.domain import Priority
from defer_soc.metrics import (
    StepReport,
    accuracy_series,
    aggregate,
    ap_accuracy,
    csv_header,
    csv_row,
    false_pos_neg,
    mann_whitney_u,
    misprioritisations,
    overall_ap_accuracy,
    permutation_p,
    read_steps_csv,
    render_table,
    summarize_run,
    write_steps_csv,
)


def report(step=0, **kw):
    return StepReport(step=step, **kw)


# ---------------------------------------------------------------------------
# StepReport


def test_step_report_validation():
    with pytest.raises(ValueError, match="entries"):
        report(pred=(1, 2, 3))
    with pytest.raises(ValueError, match="correct"):
        report(pred=(1, 0, 0, 0, 0), correct=(2, 0, 0, 0, 0))
    with pytest.raises(ValueError, match="deferred"):
        report(processed=1, deferred=2)


def test_step_report_dict_round_trip():
    r = report(step=3, arrivals=10, stage2_resolved=2, stage3=8, processed=6,
               deferred=2, unprocessed=2, fp=1, fn=0,
               pred=(1, 1, 2, 1, 1), correct=(1, 0, 2, 1, 0),
               true=(2, 1, 3, 2, 2), mis=(1, 1, 1, 1, 2), wall_ms=1.5)
    assert StepReport.from_dict(r.to_dict()) == r


# ---------------------------------------------------------------------------
# CSV


def test_csv_header_layout():
    cols = csv_header().split(",")
    assert cols[0] == "step"
    assert cols[-1] == "wall_ms"
    assert "critical_mis" in cols
    assert len(cols) == 9 + 20 + 1


def test_csv_row_wall_ms_format():
    r = report(wall_ms=1.23456)
    assert csv_row(r).endswith(",1.235")
    assert csv_row(report()).endswith(",0.000")


def test_csv_round_trip(tmp_path):
    rows = [
        report(step=i, arrivals=5 + i, stage3=4, processed=3, deferred=1,
               unprocessed=1, pred=(1, 0, 1, 1, 0), correct=(1, 0, 0, 1, 0),
               true=(2, 0, 1, 1, 1), mis=(1, 0, 1, 0, 1), wall_ms=0.125 * i)
        for i in range(4)
    ]
    path = str(tmp_path / "steps.csv")
    write_steps_csv(rows, path)
    again = read_steps_csv(path)
    assert again == rows


def test_read_steps_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "steps.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_steps_csv(str(path))


# ---------------------------------------------------------------------------
# Accuracy metrics


def acc_reports():
    return [
        report(step=0, pred=(0, 0, 4, 0, 2), correct=(0, 0, 2, 0, 2)),
        report(step=1, pred=(0, 0, 0, 0, 4), correct=(0, 0, 0, 0, 1)),
        report(step=2, pred=(0, 0, 2, 0, 0), correct=(0, 0, 2, 0, 0)),
    ]


def test_accuracy_series_skips_empty_steps():
    rs = acc_reports()
    assert accuracy_series(rs, Priority.MEDIUM) == [0.5, 1.0]
    assert accuracy_series(rs, Priority.CRITICAL) == [1.0, 0.25]
    assert accuracy_series(rs, Priority.LOW) == []


def test_ap_accuracy_means_the_series():
    rs = acc_reports()
    assert ap_accuracy(rs, Priority.MEDIUM) == pytest.approx(0.75)
    assert ap_accuracy(rs, Priority.CRITICAL) == pytest.approx(0.625)
    assert ap_accuracy(rs, Priority.LOW) is None


def test_overall_accuracy_excludes_normal_by_default():
    rs = [report(step=0, pred=(10, 0, 1, 0, 1), correct=(10, 0, 0, 0, 1))]
    # with normal: 11/12; without: 1/2
    assert overall_ap_accuracy(rs, include_normal=True) == pytest.approx(11 / 12)
    assert overall_ap_accuracy(rs) == pytest.approx(0.5)
    assert overall_ap_accuracy([report(pred=(3, 0, 0, 0, 0), correct=(3, 0, 0, 0, 0))]) is None


def test_misprioritisations_totals():
    rs = [report(step=0, mis=(0, 1, 2, 0, 1)), report(step=1, mis=(1, 0, 3, 0, 2))]
    assert misprioritisations(rs, Priority.MEDIUM) == 5
    assert misprioritisations(rs, Priority.CRITICAL) == 3
    assert misprioritisations(rs, Priority.HIGH) == 0


def test_false_pos_neg_pairs():
    pairs = [
        (Priority.NORMAL, Priority.HIGH),      # fp
        (Priority.NORMAL, Priority.NORMAL),    # neither
        (Priority.CRITICAL, Priority.NORMAL),  # fn
        (Priority.LOW, Priority.MEDIUM),       # neither (mis, not fp/fn)
        (Priority.HIGH, None),                 # unfinalized, skipped
    ]
    assert false_pos_neg(pairs) == (1, 1)


# ---------------------------------------------------------------------------
# Mann-Whitney U


def test_mw_classic_separated_case():
    u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert u == 0.0
    assert p == pytest.approx(0.1)  # 2 of C(6,3)=20 assignments as extreme


def test_mw_swap_symmetry():
    u1, p1 = mann_whitney_u([1, 2, 3], [4, 5, 6])
    u2, p2 = mann_whitney_u([4, 5, 6], [1, 2, 3])
    assert u1 + u2 == 9.0
    assert p1 == p2


def test_mw_two_by_two():
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0.0
    assert p == pytest.approx(1 / 3)


def test_mw_all_tied_is_insignificant():
    u, p = mann_whitney_u([1.0, 1.0], [1.0, 1.0])
    assert u == 2.0  # every pair a half-win
    assert p == 1.0


def test_mw_ties_counted_half():
    u, _ = mann_whitney_u([1, 2, 2], [2, 3])
    # wins: (2>?,..) pairs -> a=1: none; a=2: ties with 2 twice (x2 halves)
    assert u == 0.5 + 0.5


def test_mw_exact_matches_permutation_oracle():
    cases = [
        ([1, 5, 7], [2, 3, 9]),
        ([1.5, 1.5, 2.0], [1.0, 1.5]),
        ([3, 1], [2, 2, 2, 4]),
        ([0.1, 0.9, 0.5, 0.7], [0.2, 0.4, 0.6]),
    ]
    for a, b in cases:
        _, p = mann_whitney_u(a, b, method="exact")
        assert p == pytest.approx(permutation_p(a, b), abs=1e-12), (a, b)


def test_mw_approx_close_to_exact_mid_sizes():
    import numpy as np

    rng = np.random.default_rng(0)
    for _ in range(10):
        a = list(rng.normal(0.0, 1.0, size=12))
        b = list(rng.normal(0.5, 1.0, size=12))
        _, pe = mann_whitney_u(a, b, method="exact")
        _, pa = mann_whitney_u(a, b, method="approx")
        assert pa == pytest.approx(pe, abs=0.02)


def test_mw_approx_untied_small_samples_tight():
    # untied pools take the Edgeworth-corrected path; its worst case over
    # the whole (8,9) U lattice is ~5e-4, so 2e-3 holds for every draw
    import numpy as np

    rng = np.random.default_rng(5)
    for _ in range(30):
        a = list(rng.normal(0.0, 1.0, size=8))
        b = list(rng.normal(0.4, 1.0, size=9))
        _, pe = mann_whitney_u(a, b, method="exact")
        _, pa = mann_whitney_u(a, b, method="approx")
        assert pa == pytest.approx(pe, abs=2e-3)


def test_mw_auto_switches_on_size():
    import numpy as np

    rng = np.random.default_rng(1)
    a = list(rng.normal(size=25))
    b = list(rng.normal(size=25))  # n1*n2 = 625 > 400 -> approx
    u_auto, p_auto = mann_whitney_u(a, b)
    _, p_approx = mann_whitney_u(a, b, method="approx")
    assert p_auto == p_approx
    a, b = a[:10], b[:10]  # 100 <= 400 -> exact
    _, p_auto = mann_whitney_u(a, b)
    _, p_exact = mann_whitney_u(a, b, method="exact")
    assert p_auto == p_exact


def test_mw_large_shifted_samples_significant():
    a = [float(i) for i in range(30)]
    b = [float(i) + 20.0 for i in range(30)]
    _, p = mann_whitney_u(a, b)
    assert p < 1e-6


def test_mw_input_validation():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ValueError):
        mann_whitney_u([1.0], [2.0], method="bogus")


# ---------------------------------------------------------------------------
# Aggregation


def run_reports(bias):
    rs = []
    for i in range(6):
        correct = 3 if (i + bias) % 2 else 4
        rs.append(report(step=i, arrivals=5, stage3=5, processed=5,
                         pred=(0, 0, 0, 0, 5), correct=(0, 0, 0, 0, correct),
                         true=(0, 0, 0, 0, 5), wall_ms=1.0))
    return rs


def test_summarize_run_totals():
    s = summarize_run(run_reports(0))
    assert s["steps"] == 6
    assert s["arrivals"] == 30
    assert s["processed_pct"] == pytest.approx(100.0)
    assert s["per_category"]["critical"]["pred"] == 30
    assert s["per_category"]["critical"]["accuracy"] == pytest.approx(3.5 / 5)
    assert s["per_category"]["low"]["accuracy"] is None
    assert s["wall_ms"] == pytest.approx(6.0)


def test_aggregate_requires_equal_lengths():
    with pytest.raises(ValueError, match="mismatched"):
        aggregate({"a": run_reports(0), "b": run_reports(0)[:3]})
    with pytest.raises(ValueError, match="no runs"):
        aggregate({})


def test_aggregate_pairwise_p_values():
    agg = aggregate({"a": run_reports(0), "b": run_reports(1)})
    assert set(agg["runs"]) == {"a", "b"}
    cell = agg["p_values"]["a|b"]
    assert cell["critical"] is not None
    assert 0.0 <= cell["critical"] <= 1.0
    assert cell["low"] is None  # never predicted on either side


def test_render_table_mentions_runs_and_categories():
    agg = aggregate({"base": run_reports(0), "tuned": run_reports(1)})
    text = render_table(agg)
    assert "base" in text and "tuned" in text
    assert "critical" in text
    assert "Mann-Whitney" in text
