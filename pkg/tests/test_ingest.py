import json

import numpy as np
import pytest

from defer_soc.domain import Priority
from defer_soc.ingest import (
    Dataset,
    IngestError,
    PcaModel,
    SynthConfig,
    apply_pca,
    fit_pca,
    jacobi_eigh,
    load_csv,
    map_cvss,
    split,
    synth_generate,
    transform_dataset,
)


# ---------------------------------------------------------------------------
# CVSS mapping


def test_map_cvss_bands():
    assert map_cvss(0.0) == Priority.NORMAL
    assert map_cvss(0.1) == Priority.LOW
    assert map_cvss(3.9) == Priority.LOW
    assert map_cvss(4.0) == Priority.MEDIUM
    assert map_cvss(6.9) == Priority.MEDIUM
    assert map_cvss(7.0) == Priority.HIGH
    assert map_cvss(8.9) == Priority.HIGH
    assert map_cvss(9.0) == Priority.CRITICAL
    assert map_cvss(10.0) == Priority.CRITICAL


def test_map_cvss_off_grid_monotone():
    scores = np.linspace(0.0, 10.0, 2001)
    codes = [map_cvss(float(s)).value for s in scores]
    assert codes == sorted(codes)


def test_map_cvss_rejects_out_of_range():
    for bad in (-0.1, 10.1, float("nan")):
        with pytest.raises(IngestError):
            map_cvss(bad)


# ---------------------------------------------------------------------------
# CSV loading


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_happy_path(tmp_path):
    p = write_csv(tmp_path / "a.csv", "x,y,label\n1.0,2.0,high\n3,4,low\n")
    d = load_csv(p, label_column="label")
    assert len(d) == 2
    assert d.feature_dim == 2
    assert d.row(0)[1] == Priority.HIGH
    np.testing.assert_array_equal(d.features[1], [3.0, 4.0])


def test_load_csv_cvss_labels(tmp_path):
    p = write_csv(tmp_path / "a.csv", "x,score\n1,9.8\n2,0.0\n")
    d = load_csv(p, label_column="score", label_kind="cvss_score")
    assert list(d.labels) == [Priority.CRITICAL.value, Priority.NORMAL.value]


def test_load_csv_drops_unparseable_rows(tmp_path):
    p = write_csv(tmp_path / "a.csv", "x,label\n1.0,low\noops,low\n,high\n2.5,medium\n")
    d = load_csv(p, label_column="label")
    assert len(d) == 2
    assert d.dropped_rows == 2


def test_load_csv_ragged_row_errors(tmp_path):
    p = write_csv(tmp_path / "a.csv", "x,y,label\n1.0,2.0,low\n1.0,low\n")
    with pytest.raises(IngestError, match="ragged"):
        load_csv(p, label_column="label")


def test_load_csv_missing_label_column(tmp_path):
    p = write_csv(tmp_path / "a.csv", "x,y\n1,2\n")
    with pytest.raises(IngestError, match="label column"):
        load_csv(p, label_column="label")


def test_load_csv_one_hot(tmp_path):
    p = write_csv(tmp_path / "a.csv", "proto,x,label\ntcp,1,low\nudp,2,low\nicmp,3,high\n")
    d = load_csv(p, label_column="label", one_hot_columns=("proto",))
    # categories sorted: icmp, tcp, udp
    assert d.feature_dim == 4
    np.testing.assert_array_equal(d.features[0], [1.0, 0.0, 1.0, 0.0])
    np.testing.assert_array_equal(d.features[2], [3.0, 1.0, 0.0, 0.0])


def test_load_csv_one_hot_cardinality_cap(tmp_path):
    rows = "\n".join(f"c{i},1,low" for i in range(65))
    p = write_csv(tmp_path / "a.csv", "cat,x,label\n" + rows + "\n")
    with pytest.raises(IngestError, match="categories"):
        load_csv(p, label_column="label", one_hot_columns=("cat",))


def test_load_csv_drop_sparse_columns(tmp_path):
    p = write_csv(tmp_path / "a.csv",
                  "x,mostly_missing,label\n1,,low\n2,,low\n3,9,high\n4,,high\n")
    d = load_csv(p, label_column="label", drop_sparse_columns=True)
    assert d.feature_dim == 1
    assert len(d) == 4


def test_load_csv_empty_file(tmp_path):
    p = write_csv(tmp_path / "a.csv", "")
    with pytest.raises(IngestError, match="header"):
        load_csv(p, label_column="label")


# ---------------------------------------------------------------------------
# PCA


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2.0


def test_jacobi_matches_eigh():
    rng = np.random.default_rng(42)
    for n in (2, 3, 5, 8, 12):
        a = random_symmetric(rng, n)
        vals, vecs = jacobi_eigh(a)
        ref = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(np.sort(vals), ref, atol=1e-10)
        # reconstruction and orthogonality
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, atol=1e-9)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)


def test_jacobi_rejects_nonsymmetric():
    with pytest.raises(IngestError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_fit_pca_against_eigh_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((300, 6)) @ np.diag([5.0, 3.0, 2.0, 1.0, 0.5, 0.1])
    model = fit_pca(x, k=4)
    cov = np.cov(x, rowvar=False)
    ref_vals, ref_vecs = np.linalg.eigh(cov)
    ref_vals = ref_vals[::-1]
    ref_vecs = ref_vecs[:, ::-1]
    np.testing.assert_allclose(
        model.explained_variance_ratio, ref_vals[:4] / ref_vals.sum(), atol=1e-10
    )
    for i in range(4):
        dot = abs(model.components[i] @ ref_vecs[:, i])
        assert dot == pytest.approx(1.0, abs=1e-8)


def test_fit_pca_sign_convention_deterministic():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((100, 4))
    m1 = fit_pca(x, k=3)
    m2 = fit_pca(x.copy(), k=3)
    np.testing.assert_array_equal(m1.components, m2.components)
    for row in m1.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_fit_pca_errors():
    with pytest.raises(IngestError):
        fit_pca(np.zeros((10, 3)), k=2)  # degenerate
    with pytest.raises(IngestError):
        fit_pca(np.random.default_rng(0).standard_normal((10, 3)), k=4)


def test_apply_pca_projects():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((200, 5))
    model = fit_pca(x, k=5)
    z = apply_pca(model, x)
    # full-rank projection preserves pairwise distances
    d_orig = np.linalg.norm(x[0] - x[1])
    d_proj = np.linalg.norm(z[0] - z[1])
    assert d_proj == pytest.approx(d_orig, rel=1e-9)
    with pytest.raises(IngestError):
        apply_pca(model, np.zeros(4))


def test_pca_json_round_trip():
    rng = np.random.default_rng(5)
    model = fit_pca(rng.standard_normal((50, 4)), k=2)
    again = PcaModel.from_json(model.to_json())
    np.testing.assert_array_equal(model.mean, again.mean)
    np.testing.assert_array_equal(model.components, again.components)
    np.testing.assert_array_equal(
        model.explained_variance_ratio, again.explained_variance_ratio
    )


# ---------------------------------------------------------------------------
# Synthetic pools


def test_synth_centroid_distances_exact():
    cfg = SynthConfig(feature_dim=7, centroid_separation=6.0)
    c = cfg.centroids()
    for i in range(5):
        for j in range(i + 1, 5):
            assert np.linalg.norm(c[i] - c[j]) == pytest.approx(6.0, abs=1e-12)


def test_synth_generate_proportions():
    props = {Priority.NORMAL: 0.5, Priority.LOW: 0.1, Priority.MEDIUM: 0.2,
             Priority.HIGH: 0.15, Priority.CRITICAL: 0.05}
    d = synth_generate(SynthConfig(category_proportions=props, seed=1), 20000)
    freq = np.bincount(d.labels, minlength=5) / len(d)
    for p, want in props.items():
        assert freq[p.value] == pytest.approx(want, abs=0.02)


def test_synth_generate_deterministic():
    cfg = SynthConfig(seed=9)
    a = synth_generate(cfg, 100)
    b = synth_generate(SynthConfig(seed=9), 100)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_synth_config_validation():
    with pytest.raises(IngestError):
        SynthConfig(feature_dim=4)
    with pytest.raises(IngestError):
        SynthConfig(category_proportions={Priority.NORMAL: 0.9})
    with pytest.raises(IngestError):
        synth_generate(SynthConfig(), 0)


# ---------------------------------------------------------------------------
# Splits


def test_split_sizes_and_disjointness():
    d = synth_generate(SynthConfig(seed=2), 1003)
    parts = split(d, (0.7, 0.2, 0.1), seed=4)
    sizes = [len(p) for p in parts]
    assert sum(sizes) == 1003
    assert sizes[0] == pytest.approx(0.7 * 1003, abs=1)
    assert sizes[2] == pytest.approx(0.1 * 1003, abs=1)
    # disjoint union preserves the multiset of rows
    all_rows = np.concatenate([p.features for p in parts])
    key = np.lexsort(all_rows.T)
    orig_key = np.lexsort(d.features.T)
    np.testing.assert_array_equal(all_rows[key], d.features[orig_key])


def test_split_deterministic_and_validated():
    d = synth_generate(SynthConfig(seed=2), 100)
    a = split(d, (0.5, 0.5), seed=1)
    b = split(d, (0.5, 0.5), seed=1)
    np.testing.assert_array_equal(a[0].features, b[0].features)
    with pytest.raises(IngestError):
        split(d, (0.5, 0.4), seed=1)
    with pytest.raises(IngestError):
        split(Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int)), (1.0,), seed=1)


def test_transform_dataset_keeps_labels():
    d = synth_generate(SynthConfig(seed=6), 200)
    model = fit_pca(d.features, k=5)
    t = transform_dataset(model, d)
    assert t.feature_dim == 5
    np.testing.assert_array_equal(t.labels, d.labels)
