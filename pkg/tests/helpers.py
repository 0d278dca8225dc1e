"""Shared fixtures-adjacent helpers for the test suite."""

import numpy as np

from sparselearn import NaiveBayesModel, VariableSchema, dataset_from_table
from sparselearn.data import DatasetView

# 7 records over three ternary variables; known sparsification: defaults
# (1, 0, 0) and 8 stored pairs
TOY_TABLE = [
    (1, 1, 0),
    (2, 2, 0),
    (1, 0, 2),
    (1, 2, 1),
    (0, 0, 0),
    (1, 0, 2),
    (1, 0, 0),
]

TOY_TEXT = (
    "SPARSE 1\n"
    "vars 3\n"
    "var A 3 1\n"
    "var B 3 0\n"
    "var C 3 0\n"
    "records 7\n"
    "1:1\n"
    "0:2 1:2\n"
    "2:2\n"
    "1:2 2:1\n"
    "0:0\n"
    "2:2\n"
    "\n"
)


def random_dataset(rng, n_max=10, m_max=50, card_max=4, density=None):
    """Random dataset with random per-variable defaults and cardinalities."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    cards = rng.integers(2, card_max + 1, size=n)
    defaults = np.array([rng.integers(0, c) for c in cards])
    p = float(density) if density is not None else float(rng.choice([0.05, 0.3, 0.9]))
    X = np.tile(defaults, (m, 1))
    for i in range(n):
        hit = rng.random(m) < p
        offs = rng.integers(1, cards[i], size=m)
        X[hit, i] = (defaults[i] + offs[hit]) % cards[i]
    schema = [
        VariableSchema(f"v{i}", int(cards[i]), int(defaults[i])) for i in range(n)
    ]
    return dataset_from_table(X, schema)


def random_view(rng, ds) -> DatasetView:
    size = int(rng.integers(0, ds.n_records + 1))
    idx = np.sort(rng.choice(ds.n_records, size=size, replace=False))
    return DatasetView(ds, idx)


def random_model(rng, schema, r_c) -> NaiveBayesModel:
    prior = rng.dirichlet(np.full(r_c, 2.0))
    conds = [rng.dirichlet(np.full(v.cardinality, 2.0), size=r_c) for v in schema]
    return NaiveBayesModel(prior, conds)


def brute_posteriors(model, dense_rows):
    """Straight per-record evaluation of the mixture posterior, no logs."""
    out = []
    ll = 0.0
    for row in dense_rows:
        joint = []
        for c in range(model.cluster_count):
            v = model.prior[c]
            for i, x in enumerate(row):
                v *= model.conditionals[i][c, int(x)]
            joint.append(v)
        z = sum(joint)
        ll += np.log(z)
        out.append([j / z for j in joint])
    return np.array(out), float(ll)


def stats_close(a, b, rtol=1e-9, atol=1e-11):
    if not np.allclose(a.ss_c, b.ss_c, rtol=rtol, atol=atol):
        return False
    return all(
        np.allclose(x, y, rtol=rtol, atol=atol) for x, y in zip(a.ss_cx, b.ss_cx)
    )


def counts_identical(a, b) -> bool:
    if a.target != b.target or a.n_records != b.n_records:
        return False
    if not all(np.array_equal(x, y) for x, y in zip(a.one_way, b.one_way)):
        return False
    for x, y in zip(a.two_way, b.two_way):
        if (x is None) != (y is None):
            return False
        if x is not None and not np.array_equal(x, y):
            return False
    return True
