"""
Two ways to stand in for the production prioritizer
===================================================

Paper-parity runs use a confusion-matrix oracle: feed it the hidden truth
and it mislabels alerts at configured rates.  Real-data runs fit a naive
Bayes ensemble instead.  This script shows both, and closes the loop by
measuring an empirical confusion matrix for the fitted model - the same
artifact `defer-soc calibrate` exports for later oracle runs.
"""

import numpy as np

from defer_soc.domain import PRIORITIES, Priority
from defer_soc.ingest import SynthConfig, split, synth_generate
from defer_soc.prioritizer import (
    ConfusionMatrix,
    empirical_confusion,
    nb_bootstrap_ensemble,
    nb_predict,
    oracle_predict_batch,
)
from defer_soc.rng import substream


def show(matrix: np.ndarray, title: str):
    print(f"\n{title}")
    print(f"{'':>10}" + "".join(f"{p.label:>10}" for p in PRIORITIES))
    for p in PRIORITIES:
        row = matrix[p.value]
        print(f"{p.label:>10}" + "".join(f"{v:>10.3f}" for v in row))


# --- the oracle: configured error rates, reproduced empirically --------------

configured = ConfusionMatrix.from_rows({
    Priority.NORMAL: [1.0, 0.0, 0.0, 0.0, 0.0],
    Priority.LOW: [0.0, 0.39, 0.61, 0.0, 0.0],
    Priority.MEDIUM: [0.0, 0.023, 0.954, 0.023, 0.0],
    Priority.HIGH: [0.0, 0.0, 0.041, 0.918, 0.041],
    Priority.CRITICAL: [0.0, 0.00372, 0.00372, 0.15156, 0.841],
})
show(configured.matrix, "configured oracle rows")

rng = substream(7, "demo-oracle")
truth = np.repeat([p.value for p in PRIORITIES], 20000)
preds = oracle_predict_batch(configured, truth, rng)
emp = empirical_confusion(truth, preds)
show(emp.matrix, "empirical rows after 20k draws per category")

# --- the fitted stand-in: bootstrap naive Bayes ensemble ---------------------

pool = synth_generate(SynthConfig(seed=21, noise_sigma=2.5), 6000)
train, _, test = split(pool, (0.7, 0.2, 0.1), seed=1)
ens = nb_bootstrap_ensemble(train, members=4, rng=substream(7, "demo-ensemble"))

single = ens.members[0]
agree = np.fromiter(
    (nb_predict(single, x).value == y for x, y in zip(test.features, test.labels)),
    dtype=bool,
)
print(f"\nsingle naive Bayes accuracy on held-out test: {agree.mean():0.3f}")

# The ensemble's agreement is what the deferral stage consumes: a 4-member
# vote gives confidences in {0.25, 0.5, 0.75, 1.0}, and the l2d baseline
# defers anything below its threshold.
votes = np.stack([
    np.fromiter((nb_predict(m, x).value for x in test.features), dtype=int)
    for m in ens.members
])
modal_share = (votes == votes[0]).all(axis=0).mean()
print(f"all four members agree on {modal_share:0.1%} of test alerts")

fitted = empirical_confusion(
    test.labels,
    np.fromiter((nb_predict(single, x).value for x in test.features), dtype=int),
)
show(fitted.matrix, "fitted-model confusion on test (exportable for oracle runs)")
