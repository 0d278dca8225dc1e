"""Exception hierarchy for sparselearn."""


class SparseLearnError(Exception):
    """Base class for all sparselearn errors."""


class SchemaError(SparseLearnError, ValueError):
    """Schema, record, or input-table invariant violated."""


class FormatError(SparseLearnError, ValueError):
    """A serialized dataset, model, or tree file is malformed."""


class CorruptCountsError(SparseLearnError):
    """A derived count came out negative; the dataset violates its invariants."""


class ZeroParameterError(SparseLearnError):
    """A model parameter is zero where strict positivity is required."""


class LikelihoodUnderflowError(SparseLearnError):
    """A record's joint probability vanished for every cluster; cannot normalize."""

    def __init__(self, record_index):
        self.record_index = record_index
        super().__init__(
            f"joint probability underflowed to zero for record {record_index}; "
            "cannot normalize its posterior"
        )


class EmptyClusterError(SparseLearnError):
    """Maximum-likelihood update hit a cluster with zero expected count."""


class BenchmarkMismatchError(SparseLearnError):
    """Dense and sparse variants disagreed; timings were not reported."""
