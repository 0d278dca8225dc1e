"""Sparse data model: schema, records, datasets, views, ingestion, and file I/O.

A dataset over discrete variables is stored as one entry list per record
holding only the (variable, value) pairs whose value differs from that
variable's default value.  Iterating a record therefore costs work
proportional to its number of non-default entries, and the total storage is
proportional to ``l``, the number of non-default cells, rather than ``m * n``.

Records keep their entries sorted by variable index so that serialization is
canonical and scans can merge deterministically.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import instrumentation
from .errors import FormatError, SchemaError
from .validation import as_int_table, check_values_in_range

FORMAT_MAGIC = "SPARSE 1"


@dataclass(frozen=True)
class VariableSchema:
    """One discrete variable: its name, number of states, and default state."""

    name: str
    cardinality: int
    default_value: int

    def __post_init__(self):
        if not self.name or any(ch.isspace() for ch in self.name):
            raise SchemaError(f"variable name {self.name!r} is empty or contains whitespace")
        if self.cardinality < 2:
            raise SchemaError(
                f"variable {self.name!r}: cardinality must be >= 2, got {self.cardinality}"
            )
        if not 0 <= self.default_value < self.cardinality:
            raise SchemaError(
                f"variable {self.name!r}: default value {self.default_value} outside "
                f"[0, {self.cardinality})"
            )


@dataclass(frozen=True)
class SparseRecord:
    """Entry list of (variable_index, value_index) pairs, sorted by variable."""

    entries: tuple

    def __len__(self):
        return len(self.entries)


def _check_schema(schema) -> list:
    schema = list(schema)
    if not schema:
        raise SchemaError("schema must contain at least one variable")
    names = set()
    for v in schema:
        if not isinstance(v, VariableSchema):
            raise SchemaError(f"expected VariableSchema, got {type(v).__name__}")
        if v.name in names:
            raise SchemaError(f"duplicate variable name {v.name!r}")
        names.add(v.name)
    return schema


class SparseDataset:
    """Immutable sparse dataset: a schema plus one entry list per record.

    ``nondefault_total`` is the total number of stored pairs (``l``).  Derived
    array forms (flat entry arrays, the record/slot indicator matrix, a dense
    materialization) are built lazily and cached; they are representations of
    the same data, not copies with independent state.
    """

    def __init__(self, schema, records, validate: bool = True):
        self.schema = _check_schema(schema)
        self.records = [self._coerce_record(r) for r in records]
        if validate:
            self._validate_records()
        self.nondefault_total = sum(len(r) for r in self.records)
        self._flat = None
        self._indptr = None
        self._dense = None
        self._indicator = None
        self._dense_indicator = None

    @staticmethod
    def _coerce_record(rec) -> SparseRecord:
        if isinstance(rec, SparseRecord):
            return rec
        return SparseRecord(tuple((int(i), int(v)) for i, v in rec))

    def _validate_records(self):
        n = self.n_variables
        for j, rec in enumerate(self.records):
            prev = -1
            for i, v in rec.entries:
                if not 0 <= i < n:
                    raise SchemaError(f"record {j}: variable index {i} out of range")
                if i <= prev:
                    raise SchemaError(
                        f"record {j}: variable indices not strictly increasing at {i}"
                    )
                var = self.schema[i]
                if not 0 <= v < var.cardinality:
                    raise SchemaError(
                        f"record {j}: value {v} out of range for variable {var.name!r}"
                    )
                if v == var.default_value:
                    raise SchemaError(
                        f"record {j}: stored value equals default for variable {var.name!r}"
                    )
                prev = i

    # ---- basic shape ----
    @property
    def n_variables(self) -> int:
        return len(self.schema)

    @property
    def n_records(self) -> int:
        return len(self.records)

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([v.cardinality for v in self.schema], dtype=np.int64)

    @property
    def defaults(self) -> np.ndarray:
        return np.array([v.default_value for v in self.schema], dtype=np.int64)

    @property
    def slot_offsets(self) -> np.ndarray:
        """Prefix offsets so (variable i, value x) maps to flat slot offsets[i] + x."""
        return np.concatenate([[0], np.cumsum(self.cardinalities)])

    @property
    def n_slots(self) -> int:
        return int(self.cardinalities.sum())

    def iter_entries(self, record_index: int):
        """Yield the stored (variable, value) pairs of one record.

        Work is proportional to the record's entry count; every yield bumps
        the ``entry_visits`` counter so tests can assert that claim.
        """
        for pair in self.records[record_index].entries:
            instrumentation.counters.entry_visits += 1
            yield pair

    # ---- cached array forms ----
    def flat_entries(self):
        """Return (record_ids, variable_ids, value_ids, indptr) over all stored pairs."""
        if self._flat is None:
            ell = self.nondefault_total
            rec = np.empty(ell, dtype=np.int64)
            var = np.empty(ell, dtype=np.int64)
            val = np.empty(ell, dtype=np.int64)
            indptr = np.zeros(self.n_records + 1, dtype=np.int64)
            pos = 0
            for j, r in enumerate(self.records):
                for i, v in r.entries:
                    rec[pos] = j
                    var[pos] = i
                    val[pos] = v
                    pos += 1
                indptr[j + 1] = pos
            self._flat = (rec, var, val)
            self._indptr = indptr
        rec, var, val = self._flat
        return rec, var, val, self._indptr

    def indicator(self) -> sp.csr_matrix:
        """CSR matrix (m x n_slots) with a 1 for every stored (record, slot) pair."""
        if self._indicator is None:
            _, var, val, indptr = self.flat_entries()
            cols = self.slot_offsets[var] + val
            data = np.ones(len(cols), dtype=np.float64)
            self._indicator = sp.csr_matrix(
                (data, cols, indptr), shape=(self.n_records, self.n_slots)
            )
        return self._indicator

    def dense_indicator(self) -> sp.csr_matrix:
        """CSR matrix (m x n_slots) with a 1 for every cell of the dense view."""
        if self._dense_indicator is None:
            m, n = self.n_records, self.n_variables
            cols = (self.slot_offsets[:-1][None, :] + self.to_dense()).ravel()
            indptr = np.arange(m + 1, dtype=np.int64) * n
            data = np.ones(m * n, dtype=np.float64)
            self._dense_indicator = sp.csr_matrix(
                (data, cols, indptr), shape=(m, self.n_slots)
            )
        return self._dense_indicator

    def to_dense(self) -> np.ndarray:
        """Materialize the full m x n value matrix (cached)."""
        if self._dense is None:
            X = np.tile(self.defaults, (self.n_records, 1))
            rec, var, val, _ = self.flat_entries()
            X[rec, var] = val
            self._dense = X
        return self._dense

    # ---- equality (structural) ----
    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return self.schema == other.schema and self.records == other.records

    def __repr__(self):
        return (
            f"SparseDataset(n={self.n_variables}, m={self.n_records}, "
            f"l={self.nondefault_total})"
        )


@dataclass
class DatasetView:
    """A subset of a dataset's records, identified by sorted distinct indices."""

    base: SparseDataset
    record_indices: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.record_indices, dtype=np.int64)
        if idx.ndim != 1:
            raise SchemaError("record_indices must be 1-D")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.base.n_records:
                raise SchemaError("record index out of range for base dataset")
            if np.any(np.diff(idx) <= 0):
                raise SchemaError("record_indices must be sorted and distinct")
        self.record_indices = idx

    @property
    def m_view(self) -> int:
        return int(self.record_indices.size)

    @property
    def is_full(self) -> bool:
        # sorted + distinct + in range, so covering all of [0, m) means identity
        return self.m_view == self.base.n_records

    def flat_entries(self):
        """Stored pairs of the viewed records, with record ids renumbered 0..m_view-1."""
        if "flat" not in self._cache:
            brec, bvar, bval, bindptr = self.base.flat_entries()
            if self.is_full:
                self._cache["flat"] = (brec, bvar, bval)
            else:
                idx = self.record_indices
                starts = bindptr[idx]
                lens = bindptr[idx + 1] - starts
                total = int(lens.sum())
                if total:
                    offs = np.cumsum(lens) - lens
                    take = np.arange(total) - np.repeat(offs, lens) + np.repeat(starts, lens)
                else:
                    take = np.empty(0, dtype=np.int64)
                rec = np.repeat(np.arange(self.m_view, dtype=np.int64), lens)
                self._cache["flat"] = (rec, bvar[take], bval[take])
        return self._cache["flat"]

    @property
    def nondefault_total(self) -> int:
        if self.is_full:
            return self.base.nondefault_total
        return len(self.flat_entries()[0])

    def indicator(self) -> sp.csr_matrix:
        if self.is_full:
            return self.base.indicator()
        if "indicator" not in self._cache:
            rec, var, val = self.flat_entries()
            cols = self.base.slot_offsets[var] + val
            data = np.ones(len(cols), dtype=np.float64)
            self._cache["indicator"] = sp.csr_matrix(
                (data, (rec, cols)), shape=(self.m_view, self.base.n_slots)
            )
        return self._cache["indicator"]

    def to_dense(self) -> np.ndarray:
        if self.is_full:
            return self.base.to_dense()
        if "dense" not in self._cache:
            self._cache["dense"] = self.base.to_dense()[self.record_indices]
        return self._cache["dense"]

    def column(self, variable: int) -> np.ndarray:
        """Densified values of one variable over the viewed records."""
        return self.to_dense()[:, variable]


def full_view(dataset: SparseDataset) -> DatasetView:
    return DatasetView(dataset, np.arange(dataset.n_records, dtype=np.int64))


def as_view(data) -> DatasetView:
    if isinstance(data, DatasetView):
        return data
    if isinstance(data, SparseDataset):
        return full_view(data)
    raise SchemaError(f"expected SparseDataset or DatasetView, got {type(data).__name__}")


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def most_frequent_values(table: np.ndarray, cardinalities) -> np.ndarray:
    """Per-column most frequent value; ties broken toward the smallest index."""
    out = np.empty(table.shape[1], dtype=np.int64)
    for i, card in enumerate(cardinalities):
        freq = np.bincount(table[:, i], minlength=int(card))
        out[i] = int(np.argmax(freq))  # argmax returns the first (smallest) maximizer
    return out


def ingest_dense(table, defaults=None, cardinalities=None, names=None) -> SparseDataset:
    """Build a SparseDataset from a dense table of value indices.

    Cardinalities default to (max observed value + 1) per column, floored at 2.
    When ``defaults`` is omitted each variable's default becomes its most
    frequent value (smallest index on ties), which minimizes the number of
    stored pairs.
    """
    X = as_int_table(table)
    m, n = X.shape
    if cardinalities is None:
        cards = np.maximum(X.max(axis=0) + 1, 2)
    else:
        cards = np.asarray(cardinalities, dtype=np.int64)
        check_values_in_range(X, cards)
    if names is None:
        names = [f"x{i}" for i in range(n)]
    elif len(names) != n:
        raise SchemaError(f"{len(names)} names given for {n} columns")
    if defaults is None:
        defs = most_frequent_values(X, cards)
    else:
        defs = np.asarray(defaults, dtype=np.int64)
        if defs.shape != (n,):
            raise SchemaError("defaults must give one value per column")
    schema = [
        VariableSchema(str(names[i]), int(cards[i]), int(defs[i])) for i in range(n)
    ]
    return dataset_from_table(X, schema)


def dataset_from_table(table, schema) -> SparseDataset:
    """Sparsify a dense table against an existing schema."""
    schema = _check_schema(schema)
    X = as_int_table(table, allow_empty=True)
    if X.shape[1] != len(schema):
        raise SchemaError(
            f"table has {X.shape[1]} columns, schema has {len(schema)} variables"
        )
    cards = np.array([v.cardinality for v in schema], dtype=np.int64)
    check_values_in_range(X, cards)
    defs = np.array([v.default_value for v in schema], dtype=np.int64)
    keep = X != defs[None, :]
    records = []
    for j in range(X.shape[0]):
        nz = np.flatnonzero(keep[j])
        records.append(SparseRecord(tuple(zip(nz.tolist(), X[j, nz].tolist()))))
    return SparseDataset(schema, records, validate=False)


def densify(dataset: SparseDataset, record_index: int) -> np.ndarray:
    """Full value vector of one record: stored values where present, else defaults."""
    if not 0 <= record_index < dataset.n_records:
        raise SchemaError(
            f"record index {record_index} out of range for {dataset.n_records} records"
        )
    out = dataset.defaults.copy()
    for i, v in dataset.iter_entries(record_index):
        out[i] = v
    return out


# ---------------------------------------------------------------------------
# text file format
# ---------------------------------------------------------------------------

def _open_sink(sink):
    if isinstance(sink, (str, Path)):
        return open(sink, "w", encoding="utf-8", newline="\n"), True
    return sink, False


def _read_source(source) -> str:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return fh.read()
    return source.read()


def dumps(dataset: SparseDataset) -> str:
    """Serialize to the line-oriented sparse text format."""
    out = io.StringIO()
    out.write(f"{FORMAT_MAGIC}\n")
    out.write(f"vars {dataset.n_variables}\n")
    for v in dataset.schema:
        out.write(f"var {v.name} {v.cardinality} {v.default_value}\n")
    out.write(f"records {dataset.n_records}\n")
    for rec in dataset.records:
        out.write(" ".join(f"{i}:{v}" for i, v in rec.entries))
        out.write("\n")
    return out.getvalue()


def save(dataset: SparseDataset, sink) -> None:
    fh, close = _open_sink(sink)
    try:
        fh.write(dumps(dataset))
    finally:
        if close:
            fh.close()


def loads(text: str) -> SparseDataset:
    """Parse the sparse text format, validating every entry against the schema."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def next_line(what):
        nonlocal pos
        if pos >= len(lines):
            raise FormatError(f"unexpected end of file while reading {what}")
        line = lines[pos]
        pos += 1
        return line

    if next_line("header") != FORMAT_MAGIC:
        raise FormatError(f"bad header, expected {FORMAT_MAGIC!r}")
    vars_line = next_line("variable count").split()
    if len(vars_line) != 2 or vars_line[0] != "vars":
        raise FormatError("malformed 'vars' line")
    try:
        n = int(vars_line[1])
    except ValueError:
        raise FormatError("malformed 'vars' line") from None
    schema = []
    for k in range(n):
        parts = next_line(f"variable {k}").split()
        if len(parts) != 4 or parts[0] != "var":
            raise FormatError(f"malformed 'var' line for variable {k}")
        try:
            card, default = int(parts[2]), int(parts[3])
        except ValueError:
            raise FormatError(f"malformed 'var' line for variable {k}") from None
        try:
            schema.append(VariableSchema(parts[1], card, default))
        except SchemaError as exc:
            raise FormatError(str(exc)) from exc
    rec_line = next_line("record count").split()
    if len(rec_line) != 2 or rec_line[0] != "records":
        raise FormatError("malformed 'records' line")
    try:
        m = int(rec_line[1])
    except ValueError:
        raise FormatError("malformed 'records' line") from None
    body = lines[pos:]
    if len(body) != m:
        raise FormatError(f"record count mismatch: header says {m}, file has {len(body)}")
    records = []
    for j, line in enumerate(body):
        entries = []
        if line:
            for token in line.split(" "):
                i_s, _, v_s = token.partition(":")
                try:
                    entries.append((int(i_s), int(v_s)))
                except ValueError:
                    raise FormatError(f"record {j}: malformed entry {token!r}") from None
        records.append(SparseRecord(tuple(entries)))
    try:
        return SparseDataset(schema, records)
    except SchemaError as exc:
        raise FormatError(str(exc)) from exc


def load(source) -> SparseDataset:
    return loads(_read_source(source))
