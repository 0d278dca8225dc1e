"""Input validation helpers shared by the core functions and the estimators."""

from __future__ import annotations

import numpy as np

from .errors import SchemaError


def as_int_table(table, allow_empty: bool = False) -> np.ndarray:
    """Coerce a dense table of value indices to a 2-D int64 array.

    Accepts nested sequences or arrays.  Rejects ragged rows, non-integral
    values, negative values, and (unless ``allow_empty``) empty tables.
    """
    if isinstance(table, np.ndarray):
        arr = table
    else:
        rows = [list(r) for r in table]
        if rows:
            width = len(rows[0])
            for k, r in enumerate(rows):
                if len(r) != width:
                    raise SchemaError(
                        f"ragged table: row {k} has {len(r)} cells, expected {width}"
                    )
        arr = np.asarray(rows)
    if arr.ndim != 2:
        raise SchemaError(f"expected a 2-D table, got {arr.ndim}-D input")
    if arr.size == 0 and not allow_empty:
        raise SchemaError("empty table")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise SchemaError("table cells must be integer value indices")
    out = arr.astype(np.int64, copy=False)
    if out.size and out.min() < 0:
        raise SchemaError("value indices must be non-negative")
    return out


def check_values_in_range(table: np.ndarray, cardinalities) -> None:
    """Raise if any column holds a value >= its declared cardinality."""
    cards = np.asarray(cardinalities, dtype=np.int64)
    if table.shape[1] != cards.shape[0]:
        raise SchemaError(
            f"table has {table.shape[1]} columns but {cards.shape[0]} cardinalities given"
        )
    if table.shape[0] == 0:
        return
    col_max = table.max(axis=0)
    bad = np.flatnonzero(col_max >= cards)
    if bad.size:
        i = int(bad[0])
        raise SchemaError(
            f"column {i} holds value {int(col_max[i])} but cardinality is {int(cards[i])}"
        )


def check_target(n_variables: int, target: int) -> int:
    target = int(target)
    if not 0 <= target < n_variables:
        raise SchemaError(f"target index {target} out of range for {n_variables} variables")
    return target


def as_int_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise SchemaError(f"{name} must be 1-D")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise SchemaError(f"{name} must be integers")
    out = arr.astype(np.int64, copy=False)
    if out.size and out.min() < 0:
        raise SchemaError(f"{name} must be non-negative")
    return out
