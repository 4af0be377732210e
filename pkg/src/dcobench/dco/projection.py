"""Low-dimensional projection comparators: Gaussian random projections and
externally supplied embeddings.

A Gaussian projection P of width d makes ||P(x) - P(q)||^2 / dist^2 exactly
chi-square with d degrees of freedom, so pruning against the chi-square
quantile at confidence p_tau wrongly dismisses a qualified candidate with
probability at most 1 - p_tau. External embeddings are trusted as-is and
pruned through a plain scale factor.
"""

from __future__ import annotations

import numpy as np
from scipy import stats as _scipy_stats

from ..data import VectorSet, load_vectors, squared_distance
from .base import PRUNED, CompareOutcome, Dco, QueryContext

__all__ = ["chi2_quantile", "LshDco", "ExternalDco", "load_external_projection"]


def chi2_quantile(dof: int, p: float) -> float:
    """Q such that P[chi2_dof <= Q] = p."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(_scipy_stats.chi2.ppf(p, dof))


class _ProjectionDcoBase(Dco):
    """Shared compare/estimate logic: prune on the projected distance, then full distance."""

    proj_dim: int
    prune_mult: float
    projected: VectorSet

    def _proj_query(self, ctx: QueryContext) -> np.ndarray:
        raise NotImplementedError

    def _prepare(self, q, query_id):
        ctx = self._make_context(q, query_id)
        ctx.proj_query = self._proj_query(ctx)
        return ctx

    def compare(self, ctx, from_node, candidate, threshold_sq):
        st = ctx.stats
        st.comparisons += 1
        s = squared_distance(ctx.proj_query, self.projected.vectors[candidate])
        st.dims_evaluated += self.proj_dim
        if s > self.prune_mult * threshold_sq:
            st.pruned_count += 1
            return PRUNED
        d = squared_distance(ctx.query, self.dataset.vectors[candidate])
        st.dims_evaluated += self.dataset.dim
        st.full_dist_count += 1
        return CompareOutcome.admit(d)

    def kernel_args(self, ctx):
        return {
            "family": 2,
            "proj_data": self.projected.vectors,
            "proj_q": ctx.proj_query,
            "prune_mult": self.prune_mult,
        }


class LshDco(_ProjectionDcoBase):
    """Random Gaussian projection with a chi-square pruning test."""

    name = "lsh"

    def __init__(self, dataset: VectorSet, matrix: np.ndarray, p_tau: float,
                 projected: VectorSet | None = None):
        super().__init__(dataset)
        if not 0.0 < p_tau <= 1.0:
            raise ValueError(f"p_tau must be in (0, 1], got {p_tau}")
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.proj_dim = int(self.matrix.shape[0])
        self.p_tau = float(p_tau)
        # p_tau == 1 means an infinite quantile: never prune
        self.prune_mult = float("inf") if p_tau >= 1.0 else chi2_quantile(self.proj_dim, p_tau)
        if projected is None:
            projected = VectorSet(dataset.vectors @ self.matrix.T)
        self.projected = projected
        self.params = f"d={self.proj_dim};p_tau={p_tau:g}"

    @classmethod
    def fit(cls, dataset: VectorSet, d: int, p_tau: float, seed: int = 0) -> "LshDco":
        if d < 1:
            raise ValueError("d must be >= 1")
        rng = np.random.default_rng(seed)
        matrix = rng.standard_normal((d, dataset.dim)).astype(np.float32)
        return cls(dataset, matrix, p_tau)

    def _proj_query(self, ctx):
        return np.ascontiguousarray(self.matrix @ ctx.query, dtype=np.float32)

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        s = squared_distance(ctx.proj_query, self.projected.vectors[candidate])
        return s / self.proj_dim


class ExternalDco(_ProjectionDcoBase):
    """Precomputed (e.g. learned) embeddings acting as the distance estimator.

    The query side comes either from a linear map (matrix plus optional bias)
    or from a table of precomputed query embeddings addressed by query_id.
    Embedding-space distances are trusted as-is; the alpha scale factor is the
    only calibration knob.
    """

    name = "external"

    def __init__(self, dataset: VectorSet, embeddings: VectorSet, alpha: float = 1.0,
                 query_matrix: np.ndarray | None = None,
                 query_bias: np.ndarray | None = None,
                 query_embeddings: VectorSet | None = None):
        super().__init__(dataset)
        if embeddings.count != dataset.count:
            raise ValueError(
                f"embedding count {embeddings.count} != dataset count {dataset.count}"
            )
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.projected = embeddings
        self.proj_dim = embeddings.dim
        self.alpha = float(alpha)
        self.prune_mult = float("inf") if np.isinf(alpha) else float(alpha) ** 2
        self.query_matrix = None if query_matrix is None else np.asarray(query_matrix, np.float32)
        self.query_bias = None if query_bias is None else np.asarray(query_bias, np.float32)
        self.query_embeddings = query_embeddings
        self.params = f"d={self.proj_dim};alpha={alpha:g}"

    def _proj_query(self, ctx):
        if self.query_matrix is not None:
            e = self.query_matrix @ ctx.query
            if self.query_bias is not None:
                e = e + self.query_bias
            return np.ascontiguousarray(e, dtype=np.float32)
        if self.query_embeddings is not None:
            if ctx.query_id is None or not 0 <= ctx.query_id < self.query_embeddings.count:
                raise ValueError("precomputed query embeddings require a valid query_id")
            return self.query_embeddings.vectors[ctx.query_id]
        raise ValueError("missing query-side embeddings: supply a query matrix or embeddings")

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        return squared_distance(ctx.proj_query, self.projected.vectors[candidate])


def load_external_projection(path, alpha: float, dataset: VectorSet,
                             query_matrix_path=None, query_bias_path=None,
                             query_embeddings_path=None) -> ExternalDco:
    """Build an external-embedding comparator from fvecs files."""
    embeddings = load_vectors(path, "fvecs")
    qmat = load_vectors(query_matrix_path, "fvecs").vectors if query_matrix_path else None
    qbias = None
    if query_bias_path:
        qbias = load_vectors(query_bias_path, "fvecs").vectors[0]
    qemb = load_vectors(query_embeddings_path, "fvecs") if query_embeddings_path else None
    return ExternalDco(dataset, embeddings, alpha, query_matrix=qmat,
                       query_bias=qbias, query_embeddings=qemb)
