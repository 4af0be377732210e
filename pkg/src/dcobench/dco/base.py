"""Shared distance-comparison-operator contract and the exact baseline comparator.

A comparator decides, for one candidate against the current search threshold,
whether the candidate can be skipped without computing its full distance. The
graph search calls ``compare`` at exactly one place; everything else about a
comparator (fitting, auxiliary state, query preprocessing) lives behind this
interface.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..data import VectorSet, squared_distance

__all__ = ["SearchStats", "QueryContext", "CompareOutcome", "PRUNED", "Dco", "ExactDco"]


@dataclass
class SearchStats:
    """Per-query instrumentation.

    comparisons counts admission tests; dims_evaluated counts approximation
    dimensions plus full-distance dimensions; pruned_count + full_dist_count
    == comparisons always. false_negatives is populated only by audit-mode
    searches. Edge-geometry comparators additionally count one full-width
    setup per hop in dims_evaluated.
    """

    comparisons: int = 0
    dims_evaluated: int = 0
    full_dist_count: int = 0
    pruned_count: int = 0
    false_negatives: int | None = None
    hops: int = 0
    elapsed_s: float = 0.0
    preprocess_s: float = 0.0


@dataclass
class QueryContext:
    """Per-(query, comparator) state: the preprocessed query plus live counters.

    Never share a context between concurrent searches.
    """

    query: np.ndarray  # query in the comparator's search space, float32
    stats: SearchStats = field(default_factory=SearchStats)
    query_id: int | None = None
    # family payloads, populated by the owning comparator
    proj_query: np.ndarray | None = None
    adc_table: np.ndarray | None = None
    finger_qnorm2: float = 0.0
    finger_pq: np.ndarray | None = None
    hop_cache: dict = field(default_factory=dict)


class CompareOutcome(NamedTuple):
    """Result of one admission test: pruned, or admitted with the exact squared distance."""

    pruned: bool
    dist_sq: float

    @classmethod
    def admit(cls, dist_sq: float) -> "CompareOutcome":
        return cls(False, dist_sq)


PRUNED = CompareOutcome(True, float("nan"))


class Dco:
    """Base comparator. Subclasses fit auxiliary state and implement compare()."""

    name: str = "base"
    # parameter summary for benchmark rows, e.g. "d=64;p_tau=0.8"
    params: str = ""

    def __init__(self, dataset: VectorSet):
        self.dataset = dataset
        self.dataset_fingerprint = dataset.fingerprint()

    @property
    def search_dataset(self) -> VectorSet:
        """The vector payload the graph must carry while this comparator is active."""
        return self.dataset

    def _make_context(self, q: np.ndarray, query_id: int | None) -> QueryContext:
        q = np.ascontiguousarray(q, dtype=np.float32)
        if q.ndim != 1 or q.shape[0] != self.dataset.dim:
            raise ValueError(f"query dim {q.shape} does not match dataset dim {self.dataset.dim}")
        return QueryContext(query=q, query_id=query_id)

    def preprocess_query(self, q: np.ndarray, query_id: int | None = None) -> QueryContext:
        """Build the per-query context, recording the preprocessing time."""
        t0 = time.perf_counter()
        ctx = self._prepare(q, query_id)
        ctx.stats.preprocess_s = time.perf_counter() - t0
        return ctx

    def _prepare(self, q: np.ndarray, query_id: int | None) -> QueryContext:
        return self._make_context(q, query_id)

    def compare(self, ctx: QueryContext, from_node: int, candidate: int,
                threshold_sq: float) -> CompareOutcome:
        raise NotImplementedError

    def estimate_sq(self, ctx: QueryContext, candidate: int, fraction: float | None = None,
                    from_node: int | None = None) -> float:
        """The comparator's raw squared-distance estimate for one candidate (no threshold)."""
        raise NotImplementedError

    def kernel_args(self, ctx: QueryContext) -> dict | None:
        """Arguments for the compiled search kernel, or None to force the pure engine."""
        return None

    def exact_sq(self, ctx: QueryContext, candidate: int) -> float:
        """Oracle squared distance in the search space (used by audit mode, never timed)."""
        return squared_distance(ctx.query, self.search_dataset.vectors[candidate])


class ExactDco(Dco):
    """Baseline comparator: every test computes the full distance and never prunes."""

    name = "exact"

    def compare(self, ctx, from_node, candidate, threshold_sq):
        st = ctx.stats
        st.comparisons += 1
        d = squared_distance(ctx.query, self.dataset.vectors[candidate])
        st.full_dist_count += 1
        st.dims_evaluated += self.dataset.dim
        return CompareOutcome.admit(d)

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        return squared_distance(ctx.query, self.dataset.vectors[candidate])

    def kernel_args(self, ctx):
        return {"family": 0}
