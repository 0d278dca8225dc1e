"""Dense-vs-sparse benchmark harness.

Each mode times the algorithmic core only: counts mode times one count
extraction per repetition, estep mode times the cumulative E-step work of a
fixed 3-iteration run with a seeded 20-cluster model, and tree mode times
the count extraction performed while growing a tree.  Before any timing, the
two variants run once and their outputs are checked for agreement (exact for
counts, 1e-9 relative for E-steps, structural equality for trees); a
mismatch aborts the benchmark.  Medians over repetitions are reported.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median

import numpy as np

from .cluster import EMConfig, e_step_dense, e_step_sparse, init_model, m_step
from .counts import CountSet, dense_counts, sparse_counts
from .data import SparseDataset
from .errors import BenchmarkMismatchError, SchemaError
from .tree import TreeConfig, learn_tree, trees_equal

BENCH_CLUSTERS = 20
BENCH_ITERATIONS = 3
BENCH_TARGET = 0


@dataclass
class BenchReport:
    mode: str
    n: int
    m: int
    l: int
    ratio: float            # n*m/l, recomputed from the dataset
    dense_ms: float
    sparse_ms: float
    speedup: float
    repetitions: int

    CSV_HEADER = "mode,n,m,l,ratio,dense_ms,sparse_ms,speedup"

    def csv_row(self) -> str:
        return (
            f"{self.mode},{self.n},{self.m},{self.l},{self.ratio:.6g},"
            f"{self.dense_ms:.6g},{self.sparse_ms:.6g},{self.speedup:.6g}"
        )

    def to_csv(self) -> str:
        return f"{self.CSV_HEADER}\n{self.csv_row()}\n"


def _counts_equal(a: CountSet, b: CountSet) -> bool:
    if a.target != b.target or a.n_records != b.n_records:
        return False
    for va, vb in zip(a.one_way, b.one_way):
        if not np.array_equal(va, vb):
            return False
    for ma, mb in zip(a.two_way, b.two_way):
        if (ma is None) != (mb is None):
            return False
        if ma is not None and not np.array_equal(ma, mb):
            return False
    return True


def _stats_close(sa, sb, m: int) -> bool:
    atol = 1e-12 * (m + 1)

    def close(x, y):
        return np.allclose(x, y, rtol=1e-9, atol=atol)

    return close(sa.ss_c, sb.ss_c) and all(
        close(x, y) for x, y in zip(sa.ss_cx, sb.ss_cx)
    )


def _estep_run(dataset: SparseDataset, estep_fn, seed: int):
    """3 seeded EM iterations; returns (cumulative E-step seconds, last stats, last ll)."""
    config = EMConfig(cluster_count=BENCH_CLUSTERS, prior_strength=1.0, seed=seed)
    model = init_model(dataset.schema, BENCH_CLUSTERS, seed)
    total = 0.0
    stats = ll = None
    for _ in range(BENCH_ITERATIONS):
        t0 = time.perf_counter()
        stats, ll = estep_fn(model, dataset)
        total += time.perf_counter() - t0
        model = m_step(stats, config)
    return total, stats, ll


def bench(dataset: SparseDataset, mode: str, repetitions: int = 5,
          seed: int = 0) -> BenchReport:
    if mode not in ("counts", "estep", "tree"):
        raise SchemaError(f"unknown benchmark mode {mode!r}")
    if repetitions < 1:
        raise SchemaError("repetitions must be >= 1")
    n, m, ell = dataset.n_variables, dataset.n_records, dataset.nondefault_total
    ratio = n * m / ell if ell else float("inf")

    if mode == "counts":
        if not _counts_equal(dense_counts(dataset, BENCH_TARGET),
                             sparse_counts(dataset, BENCH_TARGET)):
            raise BenchmarkMismatchError(
                "dense and sparse count extraction disagree; not timing"
            )
        dense_times, sparse_times = [], []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            dense_counts(dataset, BENCH_TARGET)
            dense_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            sparse_counts(dataset, BENCH_TARGET)
            sparse_times.append(time.perf_counter() - t0)

    elif mode == "estep":
        _, stats_d, ll_d = _estep_run(dataset, e_step_dense, seed)
        _, stats_s, ll_s = _estep_run(dataset, e_step_sparse, seed)
        ll_ok = abs(ll_d - ll_s) <= 1e-9 * max(abs(ll_d), abs(ll_s))
        if not (ll_ok and _stats_close(stats_d, stats_s, m)):
            raise BenchmarkMismatchError(
                "dense and sparse E-steps disagree beyond 1e-9; not timing"
            )
        dense_times, sparse_times = [], []
        for _ in range(repetitions):
            dense_times.append(_estep_run(dataset, e_step_dense, seed)[0])
            sparse_times.append(_estep_run(dataset, e_step_sparse, seed)[0])

    else:  # tree
        tree_d = learn_tree(dataset, BENCH_TARGET, TreeConfig(), count_mode="dense")
        tree_s = learn_tree(dataset, BENCH_TARGET, TreeConfig(), count_mode="sparse")
        if not trees_equal(tree_d, tree_s):
            raise BenchmarkMismatchError(
                "dense and sparse count paths grew different trees; not timing"
            )
        dense_times, sparse_times = [], []
        for _ in range(repetitions):
            timer = []
            learn_tree(dataset, BENCH_TARGET, TreeConfig(), count_mode="dense",
                       count_timer=timer)
            dense_times.append(sum(timer))
            timer = []
            learn_tree(dataset, BENCH_TARGET, TreeConfig(), count_mode="sparse",
                       count_timer=timer)
            sparse_times.append(sum(timer))

    dense_ms = median(dense_times) * 1000.0
    sparse_ms = median(sparse_times) * 1000.0
    speedup = dense_ms / sparse_ms if sparse_ms > 0 else float("inf")
    return BenchReport(mode, n, m, ell, ratio, dense_ms, sparse_ms,
                       speedup, repetitions)
