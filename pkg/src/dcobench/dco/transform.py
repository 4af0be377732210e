"""Norm-preserving transformations with blocked early-abandoning comparison.

PCA and the Haar wavelet reorder distance mass into leading dimensions, so a
running partial sum is a true lower bound and pruning on it is lossless. The
random-rotation variant spreads mass uniformly instead and prunes through a
scaled hypothesis test on the partial sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import VectorSet, squared_distance
from .base import PRUNED, CompareOutcome, Dco, QueryContext

__all__ = [
    "TransformModel",
    "fit_pca",
    "fit_dwt",
    "fit_ads",
    "apply_transform",
    "invert_transform",
    "TransformDco",
]


@dataclass
class TransformModel:
    """Fitted transformation: kind is one of pca/dwt/ads."""

    kind: str
    input_dim: int
    delta_d: int = 32
    epsilon0: float = 2.1  # ads pruning confidence parameter
    mean: np.ndarray | None = None  # (D,), pca only
    rotation: np.ndarray | None = None  # (D, D), rows form the new basis; pca/ads
    padded_dim: int | None = None  # dwt only
    droppable: np.ndarray | None = None  # (padded_dim,) bool, dwt only
    eigenvalues: np.ndarray | None = field(default=None, repr=False)  # pca diagnostics

    @property
    def output_dim(self) -> int:
        if self.kind == "dwt":
            return int(self.padded_dim - int(self.droppable.sum()))
        return self.input_dim


def _canonical_signs(rows: np.ndarray) -> np.ndarray:
    """Flip each row so its first non-negligible component is positive."""
    out = rows.copy()
    for i in range(out.shape[0]):
        row = out[i]
        nz = np.nonzero(np.abs(row) > 1e-12 * max(1.0, np.abs(row).max()))[0]
        if nz.size and row[nz[0]] < 0:
            out[i] = -row
    return out


def fit_pca(training: VectorSet, delta_d: int = 32) -> TransformModel:
    """Eigenbasis of the sample covariance, ordered by descending variance.

    Deterministic up to the per-eigenvector sign, which is canonicalized.
    Degenerate (zero-variance) directions sort last.
    """
    if training.count < 2:
        raise ValueError("PCA needs at least 2 training vectors")
    x = training.vectors.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    rotation = _canonical_signs(evecs[:, order].T)
    return TransformModel(
        kind="pca",
        input_dim=training.dim,
        delta_d=delta_d,
        mean=mean,
        rotation=rotation,
        eigenvalues=evals[order],
    )


def _haar_forward(mat: np.ndarray) -> np.ndarray:
    """Full orthonormal Haar decomposition of each row (row length a power of two).

    Output ordering: overall average first, then detail bands coarsest to finest.
    """
    out = np.empty_like(mat)
    cur = mat
    pos_end = mat.shape[1]
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    while cur.shape[1] > 1:
        half = cur.shape[1] // 2
        even, odd = cur[:, 0::2], cur[:, 1::2]
        out[:, pos_end - half : pos_end] = (even - odd) * inv_sqrt2
        cur = (even + odd) * inv_sqrt2
        pos_end -= half
    out[:, 0] = cur[:, 0]
    return out


def _haar_inverse(mat: np.ndarray) -> np.ndarray:
    cur = mat[:, :1].copy()
    pos = 1
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    while pos < mat.shape[1]:
        half = cur.shape[1]
        det = mat[:, pos : pos + half]
        nxt = np.empty((mat.shape[0], half * 2), dtype=mat.dtype)
        nxt[:, 0::2] = (cur + det) * inv_sqrt2
        nxt[:, 1::2] = (cur - det) * inv_sqrt2
        cur = nxt
        pos += half
    return cur


def fit_dwt(dim: int, delta_d: int = 32) -> TransformModel:
    """Haar operator over zero-padded input, with provably-zero output columns marked droppable."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    padded = 1 << max(0, (dim - 1).bit_length())
    basis = np.zeros((dim, padded))
    basis[:, :dim] = np.eye(dim)
    coeffs = _haar_forward(basis)
    droppable = np.all(coeffs == 0.0, axis=0)
    return TransformModel(kind="dwt", input_dim=dim, delta_d=delta_d,
                          padded_dim=padded, droppable=droppable)


def fit_ads(dim: int, seed: int = 0, delta_d: int = 32, epsilon0: float = 2.1) -> TransformModel:
    """Seeded random orthonormal rotation (QR of a Gaussian matrix, R-diagonal made positive)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return TransformModel(kind="ads", input_dim=dim, delta_d=delta_d,
                          epsilon0=epsilon0, rotation=q.T)


def _transform_rows(model: TransformModel, rows: np.ndarray) -> np.ndarray:
    x = rows.astype(np.float64)
    if model.kind == "pca":
        y = (x - model.mean) @ model.rotation.T
    elif model.kind == "ads":
        y = x @ model.rotation.T
    else:
        padded = np.zeros((x.shape[0], model.padded_dim))
        padded[:, : model.input_dim] = x
        y = _haar_forward(padded)[:, ~model.droppable]
    return y.astype(np.float32)


def apply_transform(model: TransformModel, vset: VectorSet) -> VectorSet:
    """Transform a whole set; pairwise distances are preserved."""
    if vset.dim != model.input_dim:
        raise ValueError(f"dim {vset.dim} != model input dim {model.input_dim}")
    return VectorSet(_transform_rows(model, vset.vectors), vset.ids)


def invert_transform(model: TransformModel, vset: VectorSet) -> VectorSet:
    """Undo apply_transform (dropped wavelet columns are restored as zeros)."""
    if vset.dim != model.output_dim:
        raise ValueError(f"dim {vset.dim} != model output dim {model.output_dim}")
    y = vset.vectors.astype(np.float64)
    if model.kind == "pca":
        x = y @ model.rotation + model.mean
    elif model.kind == "ads":
        x = y @ model.rotation
    else:
        full = np.zeros((y.shape[0], model.padded_dim))
        full[:, ~model.droppable] = y
        x = _haar_inverse(full)[:, : model.input_dim]
    return VectorSet(x.astype(np.float32), vset.ids)


def block_factors(model: TransformModel) -> np.ndarray:
    """Per-block multiplier applied to the partial sum before the threshold test.

    Lower-bound kinds use 1 everywhere. The random-rotation kind scales the
    extrapolated estimate (D/j) * partial down by its confidence band
    (1 + epsilon0/sqrt(j))^2; the final block compares the completed exact sum
    directly.
    """
    dp = model.output_dim
    ends = list(range(model.delta_d, dp, model.delta_d)) + [dp]
    factors = np.ones(len(ends), dtype=np.float64)
    if model.kind == "ads":
        for i, j in enumerate(ends[:-1]):
            factors[i] = (dp / j) / (1.0 + model.epsilon0 / math.sqrt(j)) ** 2
    return factors


class TransformDco(Dco):
    """Comparator over a transformed copy of the dataset with blocked early abandoning."""

    def __init__(self, model: TransformModel, dataset: VectorSet,
                 transformed: VectorSet | None = None):
        super().__init__(dataset)
        if model.input_dim != dataset.dim:
            raise ValueError("model input dim does not match dataset")
        self.model = model
        self.transformed = transformed if transformed is not None else apply_transform(model, dataset)
        self._factors = block_factors(model)
        self.name = model.kind
        self.params = f"delta_d={model.delta_d}"
        if model.kind == "ads":
            self.params += f";epsilon0={model.epsilon0}"

    @classmethod
    def fit(cls, kind: str, dataset: VectorSet, seed: int = 0, delta_d: int = 32,
            epsilon0: float = 2.1, training: VectorSet | None = None) -> "TransformDco":
        if kind == "pca":
            model = fit_pca(training if training is not None else dataset, delta_d)
        elif kind == "dwt":
            model = fit_dwt(dataset.dim, delta_d)
        elif kind == "ads":
            model = fit_ads(dataset.dim, seed, delta_d, epsilon0)
        else:
            raise ValueError(f"unknown transform kind {kind!r}")
        return cls(model, dataset)

    @property
    def search_dataset(self) -> VectorSet:
        return self.transformed

    def _prepare(self, q, query_id):
        ctx = self._make_context(q, query_id)
        ctx.query = _transform_rows(self.model, ctx.query[None, :])[0]
        return ctx

    def compare(self, ctx: QueryContext, from_node: int, candidate: int,
                threshold_sq: float) -> CompareOutcome:
        st = ctx.stats
        st.comparisons += 1
        q = ctx.query
        x = self.transformed.vectors[candidate]
        dp = q.shape[0]
        delta = self.model.delta_d
        partial = 0.0
        pos = 0
        bi = 0
        while pos < dp:
            end = min(pos + delta, dp)
            d = (q[pos:end] - x[pos:end]).astype(np.float64)
            partial += float(np.dot(d, d))
            pos = end
            if partial * self._factors[bi] > threshold_sq:
                st.dims_evaluated += pos
                st.pruned_count += 1
                return PRUNED
            bi += 1
        st.dims_evaluated += dp
        st.full_dist_count += 1
        return CompareOutcome.admit(squared_distance(q, x))

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        if fraction is None:
            fraction = 0.5
        q = ctx.query
        x = self.transformed.vectors[candidate]
        dp = q.shape[0]
        j = min(dp, max(1, int(round(fraction * dp))))
        d = (q[:j] - x[:j]).astype(np.float64)
        partial = float(np.dot(d, d))
        if self.model.kind == "ads" and j < dp:
            return partial * dp / j
        return partial

    def kernel_args(self, ctx):
        return {"family": 1, "delta_d": self.model.delta_d, "block_factors": self._factors}
