"""One-way and two-way count extraction over sparse datasets.

Two interchangeable engines are provided.  The dense engine materializes
every record and tallies every (target value, variable value) cell, costing
exactly m*n cell updates.  The sparse engine tallies only the stored
non-default pairs plus one target lookup per record, then recovers every
count involving a default value by subtraction, in a fixed order:

1. a variable's default one-way count is the record count minus the sum of
   its non-default one-way counts;
2. the default-target row of each two-way matrix comes from column residuals
   against the one-way counts;
3. the default-value column for each non-default target row comes from row
   residuals against the target's one-way counts;
4. the (default target, default value) cell comes from the column residual
   of the default-value column.

Both engines produce identical integer counts; the dense engine doubles as
the test oracle for the sparse one.  Counts are stored as float64 so the same
containers also carry fractional expected counts produced by clustering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import instrumentation
from .data import as_view
from .errors import CorruptCountsError, SchemaError
from .validation import check_target


@dataclass
class CountSet:
    """One-way vectors for every variable plus two-way matrices for a target.

    ``one_way[i]`` has length r_i and holds SS(X_i = x) for each value x.
    ``two_way[i]`` has shape (r_target, r_i) with cell (t, x) = SS(T = t,
    X_i = x); the target's own slot is None.
    """

    target: int
    n_records: int
    one_way: list
    two_way: list

    @property
    def target_counts(self) -> np.ndarray:
        return self.one_way[self.target]

    def validate(self, atol: float = 1e-6) -> None:
        """Raise CorruptCountsError if marginal consistency is violated."""
        for i, vec in enumerate(self.one_way):
            _check_nonnegative(vec, f"one-way counts of variable {i}")
            if abs(vec.sum() - self.n_records) > atol:
                raise CorruptCountsError(
                    f"one-way counts of variable {i} sum to {vec.sum()}, "
                    f"expected {self.n_records}"
                )
        tc = self.target_counts
        for i, M in enumerate(self.two_way):
            if M is None:
                continue
            _check_nonnegative(M, f"two-way counts of variable {i}")
            if np.abs(M.sum(axis=1) - tc).max() > atol:
                raise CorruptCountsError(
                    f"two-way row sums of variable {i} disagree with target counts"
                )
            if np.abs(M.sum(axis=0) - self.one_way[i]).max() > atol:
                raise CorruptCountsError(
                    f"two-way column sums of variable {i} disagree with its one-way counts"
                )


def _check_nonnegative(arr: np.ndarray, what: str) -> None:
    if arr.size and arr.min() < 0:
        idx = np.unravel_index(int(np.argmin(arr)), arr.shape)
        raise CorruptCountsError(
            f"{what}: derived count is negative at {tuple(int(k) for k in idx)} "
            f"({arr[idx]}); dataset is inconsistent"
        )


# ---------------------------------------------------------------------------
# dense engine
# ---------------------------------------------------------------------------

def dense_counts(data, target: int) -> CountSet:
    """Tally counts by materializing every record; the brute-force baseline."""
    view = as_view(data)
    ds = view.base
    target = check_target(ds.n_variables, target)
    X = view.to_dense()
    m, n = X.shape
    instrumentation.counters.cell_updates += m * n
    cards = ds.cardinalities
    r_t = int(cards[target])
    t_col = X[:, target]
    one_way = [None] * n
    two_way = [None] * n
    one_way[target] = np.bincount(t_col, minlength=r_t).astype(np.float64)
    for i in range(n):
        if i == target:
            continue
        r_i = int(cards[i])
        M = np.bincount(t_col * r_i + X[:, i], minlength=r_t * r_i)
        M = M.reshape(r_t, r_i).astype(np.float64)
        two_way[i] = M
        one_way[i] = M.sum(axis=0)
    return CountSet(target, m, one_way, two_way)


# ---------------------------------------------------------------------------
# sparse engine
# ---------------------------------------------------------------------------

def sparse_counts(data, target: int) -> CountSet:
    """Tally only stored pairs, then derive all default-value counts.

    The scan performs one tally per stored pair plus one target lookup per
    record, so its work is proportional to l rather than m*n.  Output is
    exactly equal to dense_counts.
    """
    view = as_view(data)
    ds = view.base
    target = check_target(ds.n_variables, target)
    m = view.m_view
    n = ds.n_variables
    cards = ds.cardinalities
    offsets = ds.slot_offsets
    n_slots = ds.n_slots
    defaults = ds.defaults
    r_t = int(cards[target])
    t_def = int(defaults[target])

    rec, var, val = view.flat_entries()
    counters = instrumentation.counters
    counters.record_lookups += m        # one target lookup per record
    counters.pair_updates += len(rec)   # each stored pair tallied once

    slots = offsets[var] + val
    oneway_flat = np.bincount(slots, minlength=n_slots).astype(np.float64)

    # target value per record: the default unless a stored pair overrides it
    t_col = np.full(m, t_def, dtype=np.int64)
    on_target = var == target
    t_col[rec[on_target]] = val[on_target]

    # stored pairs of other variables, tallied against non-default target rows
    live = ~on_target & (t_col[rec] != t_def)
    codes = t_col[rec[live]] * n_slots + slots[live]
    two_flat = np.bincount(codes, minlength=r_t * n_slots).astype(np.float64)
    two_flat = two_flat.reshape(r_t, n_slots)

    # step 1: default one-way counts as residuals against the record count
    dslots = offsets[:-1] + defaults
    blocksums = np.add.reduceat(oneway_flat, offsets[:-1])
    oneway_flat[dslots] = m - blocksums

    valid = np.ones(n_slots, dtype=bool)
    valid[offsets[target]: offsets[target + 1]] = False
    nondef = valid.copy()
    nondef[dslots] = False

    # step 2: default-target row from column residuals (that row is still zero,
    # so summing over all rows sums exactly the tallied ones)
    two_flat[t_def, nondef] = oneway_flat[nondef] - two_flat[:, nondef].sum(axis=0)

    # step 3: default-value columns for non-default target rows, from row
    # residuals against SS(T); per-variable block sums still have zero in the
    # default column for those rows
    target_counts = oneway_flat[offsets[target]: offsets[target + 1]]
    blockrows = np.add.reduceat(two_flat, offsets[:-1], axis=1)
    rows_ix = np.flatnonzero(np.arange(r_t) != t_def)
    vars_nt = np.flatnonzero(np.arange(n) != target)
    cols_ix = dslots[vars_nt]
    two_flat[np.ix_(rows_ix, cols_ix)] = (
        target_counts[rows_ix, None] - blockrows[np.ix_(rows_ix, vars_nt)]
    )

    # step 4: (default target, default value) cells from column residuals
    two_flat[t_def, cols_ix] = (
        oneway_flat[cols_ix] - two_flat[np.ix_(rows_ix, cols_ix)].sum(axis=0)
    )

    if oneway_flat.size and oneway_flat.min() < 0:
        bad = int(np.argmin(oneway_flat))
        i = int(np.searchsorted(offsets, bad, side="right")) - 1
        _check_nonnegative(oneway_flat[offsets[i]: offsets[i + 1]],
                           f"one-way counts of variable {i}")
    derived = two_flat[:, valid]
    if derived.size and derived.min() < 0:
        for i in range(n):
            if i != target:
                _check_nonnegative(two_flat[:, offsets[i]: offsets[i + 1]],
                                   f"two-way counts of variable {i}")

    # per-variable results are disjoint views into the flat buffers
    one_way = [oneway_flat[offsets[i]: offsets[i + 1]] for i in range(n)]
    two_way = [None if i == target
               else two_flat[:, offsets[i]: offsets[i + 1]]
               for i in range(n)]
    return CountSet(target, m, one_way, two_way)


# ---------------------------------------------------------------------------
# all unordered pairs
# ---------------------------------------------------------------------------

@dataclass
class PairCountSet:
    """Two-way matrices for every unordered variable pair plus all one-ways.

    ``pairs[(i, j)]`` with i < j has shape (r_i, r_j); self-pairs are
    undefined and excluded.
    """

    n_records: int
    one_way: list
    pairs: dict

    def matrix(self, i: int, j: int) -> np.ndarray:
        if i == j:
            raise SchemaError("self-pairs are undefined")
        if i < j:
            return self.pairs[(i, j)]
        return self.pairs[(j, i)].T


def all_pairs_counts(data) -> PairCountSet:
    """Two-way counts for every variable pair, touching only stored pairs.

    The scan accumulates, per record, every combination of two stored
    entries, so its cost is the sum over records of len_j squared (quadratic
    in per-record density, still independent of m*n for sparse data).
    Default rows, columns, and corners are then derived by the same residual
    steps as sparse_counts, treating the lower-indexed variable as target.
    """
    view = as_view(data)
    ds = view.base
    n = ds.n_variables
    m = view.m_view
    cards = ds.cardinalities
    offsets = ds.slot_offsets
    defaults = ds.defaults

    rec, var, val = view.flat_entries()
    slots = offsets[var] + val
    oneway_flat = np.bincount(slots, minlength=ds.n_slots).astype(np.float64)
    dslots = offsets[:-1] + defaults
    blocksums = np.add.reduceat(oneway_flat, offsets[:-1])
    oneway_flat[dslots] = m - blocksums
    one_way = [oneway_flat[offsets[i]: offsets[i + 1]].copy() for i in range(n)]
    for i in range(n):
        _check_nonnegative(one_way[i], f"one-way counts of variable {i}")

    # flat tally buffer with one block per (i, j) pair, i < j
    base = {}
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            base[(i, j)] = total
            total += int(cards[i]) * int(cards[j])

    bounds = np.searchsorted(rec, np.arange(m + 1))
    buf = []
    for r0 in range(m):
        s, e = int(bounds[r0]), int(bounds[r0 + 1])
        for a in range(s, e):
            ia, va = int(var[a]), int(val[a])
            for b in range(a + 1, e):
                ib = int(var[b])
                buf.append(base[(ia, ib)] + va * int(cards[ib]) + int(val[b]))
    instrumentation.counters.pair_updates += len(buf)
    flat = np.bincount(np.asarray(buf, dtype=np.int64), minlength=total)
    flat = flat.astype(np.float64)

    pairs = {}
    for (i, j), off in base.items():
        r_i, r_j = int(cards[i]), int(cards[j])
        M = flat[off: off + r_i * r_j].reshape(r_i, r_j).copy()
        d_i, d_j = int(defaults[i]), int(defaults[j])
        cols = np.arange(r_j) != d_j
        rows = np.arange(r_i) != d_i
        # default row of i from column residuals (that row is still zero)
        M[d_i, cols] = one_way[j][cols] - M[:, cols].sum(axis=0)
        # default column of j for non-default rows, from row residuals
        M[rows, d_j] = one_way[i][rows] - M.sum(axis=1)[rows]
        # the doubly-default corner from the column residual
        M[d_i, d_j] = one_way[j][d_j] - M[:, d_j].sum()
        _check_nonnegative(M, f"pair counts of variables ({i},{j})")
        pairs[(i, j)] = M
    return PairCountSet(m, one_way, pairs)
