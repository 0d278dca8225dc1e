"""Machine-independent operation counters.

The scaling claims of this library are about how much work each code path
performs, not about wall-clock time on a given box.  The counters below track
the logical operations of each path so tests can assert, e.g., that the sparse
count scan visits exactly ``l`` stored pairs while the dense baseline touches
all ``m * n`` cells.  Counter updates are plain integer additions computed
from array sizes; they reflect exactly the elements the vectorized kernels
process.

Counters are global and always on.  Call :func:`reset` before a measured
section and read :data:`counters` afterwards.
"""

from dataclasses import dataclass


@dataclass
class OpCounters:
    # record iteration (sparse_store): pairs yielded by iter_entries
    entry_visits: int = 0
    # sparse count scan: stored pairs visited (one constant-work visit each)
    pair_updates: int = 0
    # sparse count scan: per-record target-value lookups
    record_lookups: int = 0
    # dense count scan: (record, variable) cells read and incremented
    cell_updates: int = 0
    # E-step joint-probability multiplies (log-domain adds count as multiplies)
    posterior_multiplies: int = 0
    # E-step per-record normalization work, counted separately
    normalize_multiplies: int = 0


counters = OpCounters()


def reset():
    """Zero all counters."""
    global counters
    for name in vars(counters):
        setattr(counters, name, 0)
