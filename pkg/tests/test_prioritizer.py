import numpy as np
import pytest

from defer_soc.domain import Alert, Priority
from defer_soc.ingest import SynthConfig, synth_generate
from defer_soc.prioritizer import (
    ConfusionMatrix,
    EnsembleConfig,
    NbModel,
    empirical_confusion,
    ensemble_predict,
    nb_bootstrap_ensemble,
    nb_fit,
    nb_log_posterior,
    nb_predict,
    oracle_predict,
    oracle_predict_batch,
)


def make_alert(true, features=None):
    if features is None:
        features = np.zeros(3)
    return Alert(id=0, features=features, true_priority=true, arrival_step=0)


# ---------------------------------------------------------------------------
# Confusion-matrix oracle


def test_confusion_matrix_validation():
    with pytest.raises(ValueError):
        ConfusionMatrix(np.eye(4))
    bad = np.eye(5)
    bad[0, 0] = 0.5
    with pytest.raises(ValueError, match="sum to 1"):
        ConfusionMatrix(bad)
    neg = np.eye(5)
    neg[0, 1] = -0.1
    neg[0, 0] = 1.1
    with pytest.raises(ValueError, match="non-negative"):
        ConfusionMatrix(neg)


def test_confusion_round_trip_json():
    rows = {p: np.eye(5)[p.value] for p in Priority}
    rows[Priority.HIGH] = [0, 0, 0.1, 0.8, 0.1]
    cm = ConfusionMatrix.from_rows(rows)
    again = ConfusionMatrix.from_json(cm.to_json())
    np.testing.assert_array_equal(cm.matrix, again.matrix)


def test_oracle_identity_matrix_is_exact():
    cm = ConfusionMatrix.identity()
    rng = np.random.default_rng(0)
    for p in Priority:
        for _ in range(20):
            assert oracle_predict(cm, p, rng) == p


def test_oracle_point_mass_row():
    rows = {p: np.eye(5)[p.value] for p in Priority}
    rows[Priority.CRITICAL] = [0, 0, 0, 1, 0]  # every critical becomes high
    cm = ConfusionMatrix.from_rows(rows)
    rng = np.random.default_rng(1)
    assert all(
        oracle_predict(cm, Priority.CRITICAL, rng) == Priority.HIGH for _ in range(50)
    )


def test_oracle_cell_convergence_within_3_sigma():
    rows = {p: np.eye(5)[p.value] for p in Priority}
    rows[Priority.MEDIUM] = [0.1, 0.2, 0.4, 0.2, 0.1]
    cm = ConfusionMatrix.from_rows(rows)
    rng = np.random.default_rng(2)
    n = 40000
    draws = np.array([oracle_predict(cm, Priority.MEDIUM, rng).value for _ in range(n)])
    freq = np.bincount(draws, minlength=5) / n
    for j, p in enumerate(rows[Priority.MEDIUM]):
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(freq[j] - p) <= 3 * sigma + 1e-12


def test_oracle_batch_matches_scalar_stream():
    rows = {p: np.eye(5)[p.value] for p in Priority}
    rows[Priority.HIGH] = [0.05, 0.05, 0.1, 0.7, 0.1]
    rows[Priority.LOW] = [0.3, 0.5, 0.2, 0.0, 0.0]
    cm = ConfusionMatrix.from_rows(rows)
    codes = np.array([3, 1, 3, 3, 1, 0, 4, 2, 1, 3])
    batch = oracle_predict_batch(cm, codes, np.random.default_rng(7))
    rng = np.random.default_rng(7)
    scalars = [oracle_predict(cm, Priority(int(c)), rng).value for c in codes]
    np.testing.assert_array_equal(batch, scalars)


# ---------------------------------------------------------------------------
# Naive Bayes


def test_nb_model_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        NbModel(priors=np.full(5, 0.1), means=np.zeros((5, 2)), variances=np.ones((5, 2)))
    with pytest.raises(ValueError, match="floor"):
        NbModel(priors=np.full(5, 0.2), means=np.zeros((5, 2)), variances=np.zeros((5, 2)))


def test_nb_log_posterior_brute_force_oracle():
    rng = np.random.default_rng(3)
    train = synth_generate(SynthConfig(seed=3, feature_dim=5), 500)
    model = nb_fit(train)
    x = rng.standard_normal(5)
    got = nb_log_posterior(model, x)
    for c in range(5):
        if model.priors[c] == 0.0:
            assert got[c] == -np.inf
            continue
        want = np.log(model.priors[c])
        for j in range(5):
            v = model.variances[c, j]
            m = model.means[c, j]
            want += -0.5 * np.log(2 * np.pi * v) - (x[j] - m) ** 2 / (2 * v)
        assert got[c] == pytest.approx(want, rel=1e-12)


def test_nb_predict_separable_blobs():
    train = synth_generate(SynthConfig(seed=4, centroid_separation=10.0), 2000)
    test = synth_generate(SynthConfig(seed=5, centroid_separation=10.0), 1000)
    model = nb_fit(train)
    correct = sum(
        nb_predict(model, test.features[i]) == Priority(int(test.labels[i]))
        for i in range(len(test))
    )
    assert correct / len(test) >= 0.99


def test_nb_predict_tie_breaks_severe():
    model = NbModel(
        priors=np.full(5, 0.2),
        means=np.zeros((5, 1)),
        variances=np.ones((5, 1)),
    )
    # all classes identical: every score ties, highest severity wins
    assert nb_predict(model, np.array([0.3])) == Priority.CRITICAL


def test_nb_zero_prior_class_never_predicted():
    train = synth_generate(SynthConfig(seed=6), 400)
    mask = train.labels != Priority.LOW.value
    from defer_soc.ingest import Dataset

    model = nb_fit(Dataset(train.features[mask], train.labels[mask]))
    assert model.priors[Priority.LOW.value] == 0.0
    rng = np.random.default_rng(8)
    for _ in range(100):
        x = rng.standard_normal(train.feature_dim) * 5
        assert nb_predict(model, x) != Priority.LOW


def test_nb_json_round_trip():
    train = synth_generate(SynthConfig(seed=7), 300)
    model = nb_fit(train)
    again = NbModel.from_json(model.to_json())
    np.testing.assert_array_equal(model.priors, again.priors)
    np.testing.assert_array_equal(model.means, again.means)
    np.testing.assert_array_equal(model.variances, again.variances)


# ---------------------------------------------------------------------------
# Ensemble


def test_ensemble_modal_vote_and_confidence():
    cms = []
    for forced in (Priority.HIGH, Priority.HIGH, Priority.MEDIUM, Priority.LOW):
        rows = {p: np.eye(5)[p.value] for p in Priority}
        rows[Priority.CRITICAL] = np.eye(5)[forced.value]
        cms.append(ConfusionMatrix.from_rows(rows))
    cfg = EnsembleConfig(members=cms)
    pr, conf = ensemble_predict(cfg, make_alert(Priority.CRITICAL), np.random.default_rng(0))
    assert pr == Priority.HIGH
    assert conf == pytest.approx(0.5)


def test_ensemble_tie_breaks_severe():
    cms = []
    for forced in (Priority.HIGH, Priority.HIGH, Priority.MEDIUM, Priority.MEDIUM):
        rows = {p: np.eye(5)[p.value] for p in Priority}
        rows[Priority.NORMAL] = np.eye(5)[forced.value]
        cms.append(ConfusionMatrix.from_rows(rows))
    pr, conf = ensemble_predict(
        EnsembleConfig(members=cms), make_alert(Priority.NORMAL), np.random.default_rng(0)
    )
    assert pr == Priority.HIGH  # 2-2 tie resolves to the severer category
    assert conf == pytest.approx(0.5)


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(members=[])
    with pytest.raises(ValueError):
        EnsembleConfig(members=[ConfusionMatrix.identity()], agreement_threshold=0.0)


def test_nb_bootstrap_ensemble_accuracy():
    train = synth_generate(SynthConfig(seed=10, centroid_separation=10.0), 2000)
    test = synth_generate(SynthConfig(seed=11, centroid_separation=10.0), 500)
    cfg = nb_bootstrap_ensemble(train, members=4, rng=np.random.default_rng(12))
    assert len(cfg.members) == 4
    rng = np.random.default_rng(13)
    hits = 0
    for i in range(len(test)):
        alert = make_alert(Priority(int(test.labels[i])), test.features[i])
        pr, conf = ensemble_predict(cfg, alert, rng)
        assert 0.0 < conf <= 1.0
        hits += pr == alert.true_priority
    assert hits / len(test) >= 0.99


# ---------------------------------------------------------------------------
# Empirical confusion


def test_empirical_confusion_counts():
    true = np.array([0, 0, 0, 0, 3, 3, 4])
    pred = np.array([0, 0, 1, 0, 3, 2, 4])
    cm = empirical_confusion(true, pred)
    np.testing.assert_allclose(cm.matrix[0], [0.75, 0.25, 0, 0, 0])
    np.testing.assert_allclose(cm.matrix[3], [0, 0, 0.5, 0.5, 0])
    np.testing.assert_allclose(cm.matrix[4], [0, 0, 0, 0, 1.0])
    # absent classes fall back to identity rows
    np.testing.assert_allclose(cm.matrix[1], np.eye(5)[1])
    np.testing.assert_allclose(cm.matrix[2], np.eye(5)[2])
