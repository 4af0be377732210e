"""Nearest-neighbor search over an HNSW graph with pluggable distance comparison
operators, plus a benchmark harness measuring their accuracy loss and pruning power."""

from ._kernels import HAVE_COMPILED
from .data import (
    DatasetStats,
    GroundTruth,
    VectorSet,
    brute_force_knn,
    dataset_stats,
    estimate_lid,
    load_vectors,
    sample_training_set,
    save_vectors,
    squared_distance,
)
from .graph import GraphIndex, SearchResult, beam_search, build_hnsw

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "VectorSet",
    "GroundTruth",
    "DatasetStats",
    "load_vectors",
    "save_vectors",
    "squared_distance",
    "brute_force_knn",
    "estimate_lid",
    "dataset_stats",
    "sample_training_set",
    "GraphIndex",
    "SearchResult",
    "build_hnsw",
    "beam_search",
    "__version__",
]
