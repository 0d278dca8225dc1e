"""Synthetic sparse dataset generation for tests and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDataset, VariableSchema, dataset_from_table
from .errors import SchemaError


@dataclass
class GenSpec:
    """Shape of a synthetic dataset.

    Every variable's default value is 0, and every cell is independently
    non-default with probability ``density`` (the drawn value is uniform over
    the non-default alternatives), so density directly controls the expected
    stored-pair total l = n * m * density.
    """

    n_variables: int
    n_records: int
    density: float
    cardinality: object = 2     # one int for all variables, or a sequence
    seed: int = 0

    def cardinalities(self) -> np.ndarray:
        if np.isscalar(self.cardinality):
            cards = np.full(self.n_variables, int(self.cardinality), dtype=np.int64)
        else:
            cards = np.asarray(self.cardinality, dtype=np.int64)
            if cards.shape != (self.n_variables,):
                raise SchemaError("cardinality sequence must have one entry per variable")
        if cards.min(initial=2) < 2:
            raise SchemaError("cardinalities must be >= 2")
        return cards

    def __post_init__(self):
        if self.n_variables < 1 or self.n_records < 1:
            raise SchemaError("need at least one variable and one record")
        if not 0.0 <= self.density <= 1.0:
            raise SchemaError("density must lie in [0, 1]")
        self.cardinalities()


def generate(spec: GenSpec) -> SparseDataset:
    """Draw a dataset with the shape ``spec`` describes; seed-deterministic."""
    rng = np.random.default_rng(spec.seed)
    cards = spec.cardinalities()
    m, n = spec.n_records, spec.n_variables
    X = np.zeros((m, n), dtype=np.int64)
    for i in range(n):
        hit = rng.random(m) < spec.density
        alts = rng.integers(1, cards[i], size=m)
        X[:, i] = np.where(hit, alts, 0)
    schema = [VariableSchema(f"x{i}", int(cards[i]), 0) for i in range(n)]
    return dataset_from_table(X, schema)
