"""Estimator wrappers around the functional core, following the fit/predict
conventions of scikit-learn (parameters stored verbatim in __init__, state
learned in fit suffixed with an underscore, get_params/set_params inherited).

Inputs are dense integer tables; each column is treated as a categorical
variable and sparsified against a most-frequent default before any
computation.  SparseDataset instances are accepted directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .cluster import EMConfig, assign_clusters, run_em
from .data import SparseDataset, dataset_from_table, ingest_dense
from .errors import SchemaError
from .tree import TreeConfig, learn_tree, predict as tree_predict
from .validation import as_int_table


def _as_dataset(X, schema=None) -> SparseDataset:
    if isinstance(X, SparseDataset):
        if schema is not None and list(X.schema) != list(schema):
            raise SchemaError("dataset schema differs from the fitted schema")
        return X
    if schema is None:
        return ingest_dense(X)
    return dataset_from_table(as_int_table(X), schema)


class NaiveBayesClusterer(ClusterMixin, BaseEstimator):
    """Soft clustering of categorical records via naive-Bayes EM.

    Parameters mirror EMConfig; `labels_` holds the hard assignment (argmax
    posterior) of the training records.
    """

    def __init__(self, n_clusters=2, max_iter=200, tol=1e-5, seed=0,
                 prior_strength=1.0, estep_mode="sparse"):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.prior_strength = prior_strength
        self.estep_mode = estep_mode

    def fit(self, X, y=None):
        dataset = _as_dataset(X)
        config = EMConfig(
            cluster_count=self.n_clusters,
            max_iterations=self.max_iter,
            tolerance=self.tol,
            seed=self.seed,
            prior_strength=self.prior_strength,
            estep_mode=self.estep_mode,
        )
        self.model_, self.trace_, self.stats_ = run_em(dataset, config)
        self.schema_ = list(dataset.schema)
        self.n_features_in_ = dataset.n_variables
        self.labels_ = np.argmax(assign_clusters(self.model_, dataset), axis=1)
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return assign_clusters(self.model_, _as_dataset(X, self.schema_))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per record under the fitted model."""
        check_is_fitted(self, "model_")
        from .cluster import e_step_sparse

        dataset = _as_dataset(X, self.schema_)
        _, ll = e_step_sparse(self.model_, dataset)
        return ll / max(dataset.n_records, 1)


class BayesFactorTreeClassifier(ClassifierMixin, BaseEstimator):
    """Decision-tree classifier over categorical features.

    The target is appended to the feature table as one more variable and a
    tree is grown for it greedily under the log Bayes-factor criterion.
    """

    def __init__(self, pseudo_count=1.0, min_leaf_records=1, max_depth=None,
                 count_mode="sparse"):
        self.pseudo_count = pseudo_count
        self.min_leaf_records = min_leaf_records
        self.max_depth = max_depth
        self.count_mode = count_mode

    def fit(self, X, y):
        X = as_int_table(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise SchemaError("y must be one integer label per row of X")
        table = np.column_stack([X, y])
        dataset = ingest_dense(table)
        target = X.shape[1]
        config = TreeConfig(
            pseudo_count=self.pseudo_count,
            min_leaf_records=self.min_leaf_records,
            max_depth=self.max_depth,
        )
        self.tree_ = learn_tree(dataset, target, config, count_mode=self.count_mode)
        self.schema_ = list(dataset.schema)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(dataset.schema[target].cardinality)
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "tree_")
        X = as_int_table(X)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        # the target column never appears on a split path, so its value in
        # the routed record is irrelevant; fill with the schema default
        pad = np.full((X.shape[0], 1), self.schema_[-1].default_value, dtype=np.int64)
        rows = np.hstack([X, pad])
        return np.vstack([tree_predict(self.tree_, row) for row in rows])

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
