"""sparselearn: sparse count extraction, EM clustering, and tree learning
for discrete datasets stored as non-default (variable, value) pairs.
"""

from .bench import BenchReport, bench
from .cluster import (
    EMConfig,
    ExpectedStats,
    NaiveBayesModel,
    assign_clusters,
    build_correction_table,
    build_default_posterior,
    dumps_model,
    e_step_dense,
    e_step_sparse,
    init_model,
    load_model,
    loads_model,
    m_step,
    run_em,
    save_model,
)
from .counts import (
    CountSet,
    PairCountSet,
    all_pairs_counts,
    dense_counts,
    sparse_counts,
)
from .data import (
    DatasetView,
    SparseDataset,
    SparseRecord,
    VariableSchema,
    dataset_from_table,
    densify,
    dumps,
    full_view,
    ingest_dense,
    load,
    loads,
    save,
)
from .errors import (
    BenchmarkMismatchError,
    CorruptCountsError,
    EmptyClusterError,
    FormatError,
    LikelihoodUnderflowError,
    SchemaError,
    SparseLearnError,
    ZeroParameterError,
)
from .estimators import BayesFactorTreeClassifier, NaiveBayesClusterer
from .generate import GenSpec, generate
from .instrumentation import OpCounters, counters, reset
from .tree import (
    DecisionTree,
    LeafNode,
    SplitNode,
    SplitScore,
    TreeConfig,
    dumps_tree,
    learn_tree,
    load_tree,
    loads_tree,
    predict,
    save_tree,
    score_split,
    tree_leaves,
    trees_equal,
)

__version__ = "0.1.0"

__all__ = [
    "BenchReport", "bench",
    "EMConfig", "ExpectedStats", "NaiveBayesModel", "assign_clusters",
    "build_correction_table", "build_default_posterior", "dumps_model",
    "e_step_dense", "e_step_sparse", "init_model", "load_model",
    "loads_model", "m_step", "run_em", "save_model",
    "CountSet", "PairCountSet", "all_pairs_counts", "dense_counts",
    "sparse_counts",
    "DatasetView", "SparseDataset", "SparseRecord", "VariableSchema",
    "dataset_from_table", "densify", "dumps", "full_view", "ingest_dense",
    "load", "loads", "save",
    "BenchmarkMismatchError", "CorruptCountsError", "EmptyClusterError",
    "FormatError", "LikelihoodUnderflowError", "SchemaError",
    "SparseLearnError", "ZeroParameterError",
    "BayesFactorTreeClassifier", "NaiveBayesClusterer",
    "GenSpec", "generate",
    "OpCounters", "counters", "reset",
    "DecisionTree", "LeafNode", "SplitNode", "SplitScore", "TreeConfig",
    "dumps_tree", "learn_tree", "load_tree", "loads_tree", "predict",
    "save_tree", "score_split", "tree_leaves", "trees_equal",
]
