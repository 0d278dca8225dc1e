"""Greedy decision-tree induction driven by two-way counts.

Candidate splits are scored by a log Bayes factor comparing the marginal
likelihood of the target's counts split by a candidate variable against the
unsplit leaf, both under symmetric Dirichlet priors.  The score needs only
the SS(T) vector and the SS(T, X_i) matrix, so either count engine supplies
it; the greedy search rescores only newly created leaves, since a score
depends only on the leaf's own record subset.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .counts import dense_counts, sparse_counts
from .data import DatasetView, as_view
from .errors import FormatError, SchemaError
from .validation import check_target

TREE_MAGIC = "DTREE 1"


@dataclass
class TreeConfig:
    pseudo_count: float = 1.0
    min_leaf_records: int = 1
    max_depth: int | None = None

    def __post_init__(self):
        if not self.pseudo_count > 0:
            raise SchemaError("pseudo_count must be > 0")
        if self.min_leaf_records < 1:
            raise SchemaError("min_leaf_records must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise SchemaError("max_depth must be >= 0")


@dataclass
class SplitScore:
    variable: int
    log_bayes_factor: float


@dataclass
class LeafNode:
    counts: np.ndarray          # SS(T) over the leaf's records
    distribution: np.ndarray    # smoothed predictive distribution over T
    view: DatasetView | None = field(default=None, repr=False)


@dataclass
class SplitNode:
    variable: int
    children: list


@dataclass
class DecisionTree:
    target: int
    root: object
    schema: list


def tree_leaves(tree: DecisionTree) -> list:
    out = []

    def walk(node):
        if isinstance(node, LeafNode):
            out.append(node)
        else:
            for ch in node.children:
                walk(ch)

    walk(tree.root)
    return out


# ---------------------------------------------------------------------------
# split scoring
# ---------------------------------------------------------------------------

def _dm_log_marginal(counts: np.ndarray, a: float) -> float:
    """Log marginal likelihood of one count vector under a flat Dirichlet(a)."""
    r = len(counts)
    total = counts.sum()
    return float(
        gammaln(r * a) - gammaln(r * a + total)
        + (gammaln(counts + a) - gammaln(a)).sum()
    )


def score_split(leaf_one_way, candidate_two_way, pseudo_count: float,
                variable: int = -1) -> SplitScore:
    """Log Bayes factor of splitting a leaf on one candidate variable.

    Positive favors the split.  A candidate whose records all share one value
    scores exactly 0: the lone non-empty column carries the same counts as
    the leaf and empty columns contribute nothing.
    """
    target_counts = np.asarray(leaf_one_way, dtype=np.float64)
    M = np.asarray(candidate_two_way, dtype=np.float64)
    if not pseudo_count > 0:
        raise SchemaError("pseudo_count must be > 0")
    if target_counts.ndim != 1 or M.ndim != 2 or M.shape[0] != target_counts.shape[0]:
        raise SchemaError(
            "two-way table must have one row per leaf target count"
        )
    if not (np.isfinite(target_counts).all() and np.isfinite(M).all()):
        raise SchemaError("split scoring requires finite counts")
    if target_counts.min(initial=0) < 0 or M.min(initial=0) < 0:
        raise SchemaError("split scoring requires non-negative counts")
    split_term = sum(_dm_log_marginal(M[:, x], pseudo_count) for x in range(M.shape[1]))
    leaf_term = _dm_log_marginal(target_counts, pseudo_count)
    return SplitScore(variable, split_term - leaf_term)


# ---------------------------------------------------------------------------
# learning
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _OpenLeaf:
    node: LeafNode
    view: DatasetView
    banned: frozenset           # target plus variables already split on this path
    depth: int
    order: int                  # creation order, for deterministic tie-breaks
    parent: SplitNode | None
    slot: int                   # child index under parent, -1 for the root
    best: SplitScore | None = None
    counts: object = field(default=None, repr=False)


def _view_column(view: DatasetView, variable: int, default: int) -> np.ndarray:
    """One variable's values over a view, gathered from stored pairs only."""
    col = np.full(view.m_view, default, dtype=np.int64)
    rec, var, val = view.flat_entries()
    on = var == variable
    col[rec[on]] = val[on]
    return col


def learn_tree(data, target: int, config: TreeConfig | None = None,
               count_mode: str = "sparse",
               count_timer: list | None = None) -> DecisionTree:
    """Grow a tree greedily until no split has a positive log Bayes factor.

    Each step applies the best-scoring (leaf, variable) pair; ties go to the
    lowest variable index, then the earliest-created leaf, so the result is
    deterministic and identical under both count engines.  ``count_timer``,
    if given, collects the elapsed seconds of every count extraction call.
    """
    config = config or TreeConfig()
    view = as_view(data)
    ds = view.base
    target = check_target(ds.n_variables, target)
    if count_mode not in ("dense", "sparse"):
        raise SchemaError(f"unknown count_mode {count_mode!r}")
    count_fn = sparse_counts if count_mode == "sparse" else dense_counts
    r_t = ds.schema[target].cardinality
    a = config.pseudo_count

    def extract(leaf_view):
        if count_timer is None:
            return count_fn(leaf_view, target)
        t0 = time.perf_counter()
        cs = count_fn(leaf_view, target)
        count_timer.append(time.perf_counter() - t0)
        return cs

    def make_leaf(counts_vec, leaf_view):
        dist = (counts_vec + a) / (counts_vec.sum() + a * r_t)
        return LeafNode(counts_vec, dist, view=leaf_view)

    def eligible(leaf: _OpenLeaf) -> bool:
        if leaf.view.m_view < config.min_leaf_records:
            return False
        if config.max_depth is not None and leaf.depth >= config.max_depth:
            return False
        return len(leaf.banned) < ds.n_variables

    def score_leaf(leaf: _OpenLeaf, cs) -> None:
        leaf.counts = cs
        best = None
        for i in range(ds.n_variables):
            if i in leaf.banned:
                continue
            sc = score_split(cs.target_counts, cs.two_way[i], a, variable=i)
            if sc.log_bayes_factor > 0 and (
                best is None or sc.log_bayes_factor > best.log_bayes_factor
            ):
                best = sc
        leaf.best = best

    first = extract(view)
    root_box = [make_leaf(first.target_counts.copy(), view)]
    open_leaves = [_OpenLeaf(root_box[0], view, frozenset([target]), 0, 0, None, -1)]
    if eligible(open_leaves[0]):
        score_leaf(open_leaves[0], first)
    order = 1

    while True:
        pick = None
        for leaf in open_leaves:
            if leaf.best is None:
                continue
            if pick is None:
                pick = leaf
                continue
            cur, ref = leaf.best.log_bayes_factor, pick.best.log_bayes_factor
            if cur > ref or (
                cur == ref
                and (leaf.best.variable, leaf.order) < (pick.best.variable, pick.order)
            ):
                pick = leaf
        if pick is None:
            break
        open_leaves.remove(pick)
        var = pick.best.variable
        vschema = ds.schema[var]
        col = _view_column(pick.view, var, vschema.default_value)
        M = pick.counts.two_way[var]
        split = SplitNode(var, [])
        banned = pick.banned | {var}
        for x in range(vschema.cardinality):
            child_view = DatasetView(ds, pick.view.record_indices[col == x])
            child_node = make_leaf(M[:, x].copy(), child_view)
            split.children.append(child_node)
            child = _OpenLeaf(child_node, child_view, banned,
                              pick.depth + 1, order, split, x)
            order += 1
            if eligible(child):
                score_leaf(child, extract(child_view))
            open_leaves.append(child)
        if pick.parent is None:
            root_box[0] = split
        else:
            pick.parent.children[pick.slot] = split

    return DecisionTree(target, root_box[0], list(ds.schema))


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def predict(tree: DecisionTree, record) -> np.ndarray:
    """Route one record to a leaf; returns its distribution over the target.

    Accepts a SparseRecord (missing variables take their defaults) or any
    dense sequence of value indices.
    """
    if hasattr(record, "entries"):
        dense = [v.default_value for v in tree.schema]
        for i, v in record.entries:
            i, v = int(i), int(v)
            if not 0 <= i < len(tree.schema):
                raise SchemaError(f"variable index {i} out of range")
            dense[i] = v
    else:
        dense = [int(v) for v in record]
        if len(dense) != len(tree.schema):
            raise SchemaError(
                f"record has {len(dense)} values, schema has {len(tree.schema)}"
            )
    for i, v in enumerate(dense):
        if not 0 <= v < tree.schema[i].cardinality:
            raise SchemaError(f"value {v} out of range for variable {i}")

    node = tree.root
    while isinstance(node, SplitNode):
        node = node.children[dense[node.variable]]
    return node.distribution.copy()


def trees_equal(a: DecisionTree, b: DecisionTree) -> bool:
    """Structural equality: same target, same splits, same leaf counts."""
    if a.target != b.target:
        return False

    def eq(x, y):
        if isinstance(x, SplitNode) != isinstance(y, SplitNode):
            return False
        if isinstance(x, SplitNode):
            if x.variable != y.variable or len(x.children) != len(y.children):
                return False
            return all(eq(cx, cy) for cx, cy in zip(x.children, y.children))
        return (
            x.counts.shape == y.counts.shape
            and np.array_equal(x.counts, y.counts)
            and np.allclose(x.distribution, y.distribution, rtol=0, atol=1e-12)
        )

    return eq(a.root, b.root)


# ---------------------------------------------------------------------------
# tree file format
# ---------------------------------------------------------------------------

def dumps_tree(tree: DecisionTree) -> str:
    lines = [TREE_MAGIC, f"target {tree.target}"]

    def emit(node):
        if isinstance(node, SplitNode):
            lines.append(f"split {node.variable}")
            for ch in node.children:
                emit(ch)
        else:
            nums = [f"{v:.17g}" for v in node.counts]
            nums += [f"{v:.17g}" for v in node.distribution]
            lines.append("leaf " + " ".join(nums))

    emit(tree.root)
    return "\n".join(lines) + "\n"


def save_tree(tree: DecisionTree, sink) -> None:
    if hasattr(sink, "write"):
        sink.write(dumps_tree(tree))
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_tree(tree))


def loads_tree(text: str, schema) -> DecisionTree:
    """Parse a tree file; the schema supplies cardinalities for child counts."""
    schema = list(schema)
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != TREE_MAGIC:
        raise FormatError(f"bad header, expected {TREE_MAGIC!r}")
    if len(lines) < 2 or not lines[1].startswith("target "):
        raise FormatError("missing target line")
    try:
        target = int(lines[1].split()[1])
    except (IndexError, ValueError):
        raise FormatError("malformed target line") from None
    if not 0 <= target < len(schema):
        raise FormatError(f"target {target} out of range for schema")
    r_t = schema[target].cardinality
    pos = 2

    def parse() -> object:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError("unexpected end of file inside tree body")
        parts = lines[pos].split()
        pos += 1
        if parts[0] == "split":
            if len(parts) != 2:
                raise FormatError("malformed split line")
            var = int(parts[1])
            if not 0 <= var < len(schema):
                raise FormatError(f"split variable {var} out of range")
            children = [parse() for _ in range(schema[var].cardinality)]
            return SplitNode(var, children)
        if parts[0] == "leaf":
            if len(parts) != 1 + 2 * r_t:
                raise FormatError(
                    f"leaf line has {len(parts) - 1} numbers, expected {2 * r_t}"
                )
            try:
                nums = [float(v) for v in parts[1:]]
            except ValueError:
                raise FormatError("malformed leaf line") from None
            return LeafNode(np.array(nums[:r_t]), np.array(nums[r_t:]))
        raise FormatError(f"unknown node kind {parts[0]!r}")

    root = parse()
    if pos != len(lines):
        raise FormatError(f"{len(lines) - pos} trailing lines after tree body")
    return DecisionTree(target, root, schema)


def load_tree(source, schema) -> DecisionTree:
    if hasattr(source, "read"):
        return loads_tree(source.read(), schema)
    with open(source, "r", encoding="utf-8") as fh:
        return loads_tree(fh.read(), schema)
