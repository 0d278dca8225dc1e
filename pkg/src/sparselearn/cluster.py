"""Naive-Bayes clustering by EM over sparse datasets.

The model has a hidden cluster variable C rendering all observed variables
mutually independent given C.  Two E-step implementations produce identical
expected statistics (within floating-point tolerance):

* the dense E-step evaluates each record's posterior as the full product of
  one conditional parameter per variable, costing r_C * (n + 1) multiplies
  per record;
* the sparse E-step precomputes, once per iteration, the unnormalized
  posterior of an all-default record plus one correction ratio per
  (variable, non-default value, cluster); a record's posterior is the base
  times the corrections of its stored pairs, costing r_C multiplies per
  stored pair.  Expected counts are accumulated only for stored pairs; the
  default-value column of each variable is derived afterward as the residual
  of the expected cluster sizes.

All products run in log domain with a max-shift before exponentiation, so
long products of small parameters cannot underflow.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import instrumentation
from .data import as_view
from .errors import (
    CorruptCountsError,
    EmptyClusterError,
    FormatError,
    LikelihoodUnderflowError,
    SchemaError,
    ZeroParameterError,
)

MODEL_MAGIC = "NBMODEL 1"


@dataclass
class NaiveBayesModel:
    """Mixture weights plus per-variable conditional tables.

    ``prior`` has length r_C; ``conditionals[i]`` has shape (r_C, r_i) with
    row c holding the distribution of variable i inside cluster c.
    """

    prior: np.ndarray
    conditionals: list

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=np.float64)
        self.conditionals = [np.asarray(t, dtype=np.float64) for t in self.conditionals]
        if self.prior.ndim != 1:
            raise SchemaError(f"prior must be 1-d, got shape {self.prior.shape}")
        r_c = self.cluster_count
        if r_c < 1:
            raise SchemaError("model needs at least one cluster")
        for i, t in enumerate(self.conditionals):
            if t.ndim != 2 or t.shape[0] != r_c:
                raise SchemaError(
                    f"conditional table {i} has shape {t.shape}, expected ({r_c}, r_i)"
                )

    @property
    def cluster_count(self) -> int:
        return len(self.prior)

    @property
    def n_variables(self) -> int:
        return len(self.conditionals)


@dataclass
class ExpectedStats:
    """Posterior-weighted counts: cluster sizes and per-variable tables."""

    ss_c: np.ndarray
    ss_cx: list

    @property
    def n_records(self) -> float:
        return float(self.ss_c.sum())


@dataclass
class EMConfig:
    cluster_count: int
    max_iterations: int = 200
    tolerance: float = 1e-5
    seed: int = 0
    prior_strength: float = 1.0
    estep_mode: str = "sparse"

    def __post_init__(self):
        if self.cluster_count < 1:
            raise SchemaError("cluster_count must be >= 1")
        if self.max_iterations < 0:
            raise SchemaError("max_iterations must be >= 0")
        if not self.tolerance > 0:
            raise SchemaError("tolerance must be > 0")
        if self.prior_strength < 0:
            raise SchemaError("prior_strength must be >= 0")
        if self.estep_mode not in ("dense", "sparse"):
            raise SchemaError(f"unknown estep_mode {self.estep_mode!r}")


def init_model(schema, cluster_count: int, seed: int) -> NaiveBayesModel:
    """Uniform mixture weights, conditional rows drawn flat-Dirichlet, seeded."""
    if cluster_count < 1:
        raise SchemaError("cluster_count must be >= 1")
    rng = np.random.default_rng(seed)
    prior = np.full(cluster_count, 1.0 / cluster_count)
    conditionals = []
    for v in schema:
        rows = rng.dirichlet(np.ones(v.cardinality), size=cluster_count)
        rows /= rows.sum(axis=1, keepdims=True)
        conditionals.append(rows)
    return NaiveBayesModel(prior, conditionals)


# ---------------------------------------------------------------------------
# shared numeric pieces
# ---------------------------------------------------------------------------

def _check_model_matches(model: NaiveBayesModel, ds) -> None:
    if model.n_variables != ds.n_variables:
        raise SchemaError(
            f"model covers {model.n_variables} variables, dataset has {ds.n_variables}"
        )
    for i, t in enumerate(model.conditionals):
        if t.shape[1] != ds.schema[i].cardinality:
            raise SchemaError(
                f"conditional table {i} has {t.shape[1]} columns, "
                f"variable cardinality is {ds.schema[i].cardinality}"
            )


def _flat_params(model: NaiveBayesModel):
    """Conditionals stacked into an (n_slots, r_C) table in slot order."""
    cards = np.array([t.shape[1] for t in model.conditionals], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(cards)])
    if model.n_variables:
        flat = np.concatenate([t.T for t in model.conditionals], axis=0)
    else:
        flat = np.zeros((0, model.cluster_count))
    return flat, offsets


def _finish_posteriors(logp: np.ndarray):
    """Normalize joint log-probabilities row-wise; return (posteriors, ll)."""
    shift = logp.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(shift))
    if bad.size:
        raise LikelihoodUnderflowError(int(bad[0]))
    np.subtract(logp, shift[:, None], out=logp)
    p = np.exp(logp, out=logp)
    z = p.sum(axis=1)
    p /= z[:, None]
    instrumentation.counters.normalize_multiplies += p.size
    ll = float((np.log(z) + shift).sum())
    return p, ll


def _stats_from_posteriors(view, p: np.ndarray, sparse: bool) -> ExpectedStats:
    ds = view.base
    offsets = ds.slot_offsets
    n = ds.n_variables
    ss_c = p.sum(axis=0)
    ind = view.indicator() if sparse else _dense_indicator(view)
    flat = np.asarray(ind.T @ p)  # (n_slots, r_C)
    if sparse and n:
        # stored pairs covered only non-default values; each default-value
        # row is the residual of the expected cluster sizes
        blocksum = np.add.reduceat(flat, offsets[:-1], axis=0)
        resid = ss_c[None, :] - blocksum
        tol = 1e-9 * (view.m_view + 1.0)
        if resid.size and resid.min() < -tol:
            i, c = np.unravel_index(int(np.argmin(resid)), resid.shape)
            raise CorruptCountsError(
                f"expected counts of variable {i}, cluster {c}: derived "
                f"default-value count is negative ({resid[i, c]})"
            )
        np.maximum(resid, 0.0, out=resid)
        flat[offsets[:-1] + ds.defaults] = resid
    buf = np.ascontiguousarray(flat.T)  # (r_C, n_slots)
    ss_cx = [buf[:, offsets[i]: offsets[i + 1]] for i in range(n)]
    return ExpectedStats(ss_c, ss_cx)


def _dense_indicator(view):
    if view.is_full:
        return view.base.dense_indicator()
    m, n = view.m_view, view.base.n_variables
    cols = (view.base.slot_offsets[:-1][None, :] + view.to_dense()).ravel()
    indptr = np.arange(m + 1, dtype=np.int64) * n
    return sp.csr_matrix(
        (np.ones(m * n), cols, indptr), shape=(m, view.base.n_slots)
    )


# ---------------------------------------------------------------------------
# E-steps
# ---------------------------------------------------------------------------

def e_step_dense(model: NaiveBayesModel, data):
    """Posteriors from the full per-variable product; the brute-force baseline."""
    view = as_view(data)
    ds = view.base
    _check_model_matches(model, ds)
    m = view.m_view
    r_c = model.cluster_count
    flat, _ = _flat_params(model)
    with np.errstate(divide="ignore"):
        log_t = np.log(flat)
        log_prior = np.log(model.prior)
    logp = np.asarray(_dense_indicator(view) @ log_t) + log_prior[None, :]
    instrumentation.counters.posterior_multiplies += r_c * (ds.n_variables + 1) * m
    p, ll = _finish_posteriors(logp)
    return _stats_from_posteriors(view, p, sparse=False), ll


def _check_defaults(model: NaiveBayesModel, defaults) -> np.ndarray:
    defaults = np.asarray(defaults, dtype=np.int64)
    if len(defaults) != model.n_variables:
        raise SchemaError("one default value per model variable required")
    return defaults


def _check_default_params(flat, dslots):
    # only the default-value parameters must stay off zero; other zeros map
    # to -inf corrections, which the log domain represents exactly
    if dslots.size and flat[dslots].min() <= 0:
        bad = int(np.argmin(flat[dslots].min(axis=1)))
        raise ZeroParameterError(
            f"variable {bad} has a zero default-value parameter; "
            "re-estimate with prior_strength > 0"
        )


def build_default_posterior(model: NaiveBayesModel, defaults) -> np.ndarray:
    """Log joint probability of cluster c and an all-default record, per c."""
    defaults = _check_defaults(model, defaults)
    flat, offsets = _flat_params(model)
    dslots = offsets[:-1] + defaults
    _check_default_params(flat, dslots)
    with np.errstate(divide="ignore"):
        return np.log(model.prior) + np.log(flat[dslots]).sum(axis=0)


def build_correction_table(model: NaiveBayesModel, defaults) -> np.ndarray:
    """Log ratio of each value's parameter to its variable's default parameter.

    Returned as an (n_slots, r_C) table in slot order; default-value rows are
    exactly zero so only stored pairs contribute in the sparse posterior.
    """
    defaults = _check_defaults(model, defaults)
    flat, offsets = _flat_params(model)
    dslots = offsets[:-1] + defaults
    _check_default_params(flat, dslots)
    with np.errstate(divide="ignore"):
        logdef = np.log(flat[dslots])
        corr = np.log(flat) - np.repeat(logdef, np.diff(offsets), axis=0)
    corr[dslots] = 0.0
    return corr


def _sparse_tables(model: NaiveBayesModel, defaults):
    """Default-record posterior and correction table from one parameter pass."""
    defaults = _check_defaults(model, defaults)
    flat, offsets = _flat_params(model)
    dslots = offsets[:-1] + defaults
    _check_default_params(flat, dslots)
    with np.errstate(divide="ignore"):
        logflat = np.log(flat)
        logdef = logflat[dslots]
        base = np.log(model.prior) + logdef.sum(axis=0)
    corr = logflat - np.repeat(logdef, np.diff(offsets), axis=0)
    corr[dslots] = 0.0
    return base, corr


def _sparse_log_posteriors(model: NaiveBayesModel, view) -> np.ndarray:
    ds = view.base
    _check_model_matches(model, ds)
    base, corr = _sparse_tables(model, ds.defaults)
    ind = view.indicator()
    logp = np.asarray(ind @ corr) + base[None, :]
    instrumentation.counters.posterior_multiplies += model.cluster_count * ind.nnz
    return logp


def e_step_sparse(model: NaiveBayesModel, data):
    """Posteriors from the default-record base plus stored-pair corrections.

    Output matches e_step_dense within 1e-9 relative on every statistic and
    on the log-likelihood; only the work differs (r_C per stored pair instead
    of r_C per cell).
    """
    view = as_view(data)
    logp = _sparse_log_posteriors(model, view)
    p, ll = _finish_posteriors(logp)
    return _stats_from_posteriors(view, p, sparse=True), ll


def assign_clusters(model: NaiveBayesModel, data) -> np.ndarray:
    """Per-record posterior cluster memberships, shape (m, r_C), rows sum to 1."""
    view = as_view(data)
    logp = _sparse_log_posteriors(model, view)
    p, _ = _finish_posteriors(logp)
    return p


# ---------------------------------------------------------------------------
# M-step and the EM loop
# ---------------------------------------------------------------------------

def m_step(stats: ExpectedStats, config: EMConfig) -> NaiveBayesModel:
    """Re-estimate parameters from expected counts.

    With prior_strength 0 this is maximum likelihood; a positive strength s
    adds s pseudo-observations per cell (symmetric Dirichlet smoothing),
    keeping every parameter strictly positive.
    """
    s = config.prior_strength
    ss_c = stats.ss_c
    m = ss_c.sum()
    r_c = len(ss_c)
    if m <= 0:
        raise SchemaError("expected counts cover zero records")
    if s == 0 and ss_c.min() <= 0:
        empty = int(np.argmin(ss_c))
        raise EmptyClusterError(
            f"cluster {empty} has zero expected count; maximum-likelihood update "
            "is undefined, use prior_strength > 0"
        )
    prior = (ss_c + s) / (m + s * r_c)
    conditionals = []
    for M in stats.ss_cx:
        r_i = M.shape[1]
        conditionals.append((M + s) / (ss_c + s * r_i)[:, None])
    return NaiveBayesModel(prior, conditionals)


def run_em(data, config: EMConfig, time_trace: list | None = None):
    """Alternate E- and M-steps until the log-likelihood change is small.

    Returns (model, trace, stats): the model whose E-step produced the last
    trace entry is returned when the run converged; after hitting
    max_iterations the model has one further M-step applied.  stats is None
    when max_iterations is 0.  ``time_trace``, if given, collects each
    iteration's elapsed seconds.
    """
    view = as_view(data)
    estep = e_step_sparse if config.estep_mode == "sparse" else e_step_dense
    model = init_model(view.base.schema, config.cluster_count, config.seed)
    trace = []
    stats = None
    for it in range(config.max_iterations):
        t0 = time.perf_counter()
        stats, ll = estep(model, view)
        trace.append(ll)
        stop = (
            it > 0
            and abs(ll - trace[-2]) / max(abs(ll), 1e-300) < config.tolerance
        )
        if not stop:
            model = m_step(stats, config)
        if time_trace is not None:
            time_trace.append(time.perf_counter() - t0)
        if stop:
            break
    return model, trace, stats


# ---------------------------------------------------------------------------
# model file format
# ---------------------------------------------------------------------------

def dumps_model(model: NaiveBayesModel) -> str:
    lines = [MODEL_MAGIC,
             f"clusters {model.cluster_count}",
             f"vars {model.n_variables}",
             "prior " + " ".join(f"{v:.17g}" for v in model.prior)]
    for i, t in enumerate(model.conditionals):
        for c in range(model.cluster_count):
            row = " ".join(f"{v:.17g}" for v in t[c])
            lines.append(f"cond {i} {c} {row}")
    return "\n".join(lines) + "\n"


def save_model(model: NaiveBayesModel, sink) -> None:
    if hasattr(sink, "write"):
        sink.write(dumps_model(model))
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_model(model))


def loads_model(text: str) -> NaiveBayesModel:
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != MODEL_MAGIC:
        raise FormatError(f"bad header, expected {MODEL_MAGIC!r}")
    try:
        if lines[1].split()[0] != "clusters" or lines[2].split()[0] != "vars":
            raise FormatError("malformed model header lines")
        r_c = int(lines[1].split()[1])
        n = int(lines[2].split()[1])
        prior_parts = lines[3].split()
        if prior_parts[0] != "prior" or len(prior_parts) != r_c + 1:
            raise FormatError("malformed prior line")
        prior = np.array([float(v) for v in prior_parts[1:]])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed model header: {exc}") from None
    body = lines[4:]
    if len(body) != n * r_c:
        raise FormatError(
            f"expected {n * r_c} conditional rows, found {len(body)}"
        )
    conditionals = []
    pos = 0
    for i in range(n):
        rows = []
        for c in range(r_c):
            parts = body[pos].split()
            pos += 1
            if len(parts) < 4 or parts[0] != "cond" or parts[1] != str(i) or parts[2] != str(c):
                raise FormatError(f"malformed conditional row for variable {i}, cluster {c}")
            try:
                rows.append([float(v) for v in parts[3:]])
            except ValueError:
                raise FormatError(
                    f"malformed conditional row for variable {i}, cluster {c}"
                ) from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"ragged conditional rows for variable {i}")
        conditionals.append(np.array(rows))
    model = NaiveBayesModel(prior, conditionals)
    if abs(model.prior.sum() - 1.0) > 1e-9:
        raise FormatError("prior does not sum to 1")
    for i, t in enumerate(model.conditionals):
        if np.abs(t.sum(axis=1) - 1.0).max() > 1e-9:
            raise FormatError(f"conditional rows of variable {i} do not sum to 1")
    return model


def load_model(source) -> NaiveBayesModel:
    if hasattr(source, "read"):
        return loads_model(source.read())
    with open(source, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())
