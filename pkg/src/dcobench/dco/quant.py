"""Product quantization with a learned rotation and table-based distance estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import VectorSet, squared_distance
from .base import PRUNED, CompareOutcome, Dco

__all__ = ["kmeans", "QuantModel", "fit_opq", "encode", "reconstruct", "OpqDco"]


def _assign(points64: np.ndarray, centroids64: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point (ties to the smaller index) and the squared distances."""
    d2 = (
        np.einsum("ij,ij->i", points64, points64)[:, None]
        - 2.0 * (points64 @ centroids64.T)
        + np.einsum("ij,ij->i", centroids64, centroids64)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    best = d2[np.arange(points64.shape[0]), labels]
    np.maximum(best, 0.0, out=best)
    return labels.astype(np.int32), best


def kmeans(points, ks: int, iters: int, seed: int = 0):
    """Lloyd's algorithm from a random-distinct-points start.

    Empty clusters are reseeded to the point currently farthest from its centroid.
    Returns (centroids float32 (ks, d), labels int32 (n,), distortion history)
    where the history is the mean squared assignment distance recorded at each
    assignment step; it is non-increasing.
    """
    pts = points.vectors if isinstance(points, VectorSet) else np.asarray(points)
    n = pts.shape[0]
    if ks > n:
        raise ValueError(f"ks={ks} exceeds point count {n}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = pts.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = x[rng.choice(n, size=ks, replace=False)].copy()
    history: list[float] = []
    labels = np.zeros(n, dtype=np.int32)
    for it in range(iters + 1):
        labels, best = _assign(x, centroids)
        history.append(float(best.mean()))
        if it == iters:
            break
        counts = np.bincount(labels, minlength=ks)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        for c in np.nonzero(~nonempty)[0]:
            far = int(np.argmax(best))
            centroids[c] = x[far]
            best[far] = 0.0
    return centroids.astype(np.float32), labels, history


@dataclass
class QuantModel:
    """Per-subspace codebooks over a rotated, zero-padded copy of the data."""

    m: int
    ks: int
    input_dim: int
    padded_dim: int
    rotation: np.ndarray  # (Dp, Dp) float32, rows form the new basis
    codebooks: np.ndarray  # (m, ks, sub_dim) float32
    codes: np.ndarray  # (N, m) uint8
    alpha: float = 1.0
    train_history: list = field(default_factory=list, repr=False)

    @property
    def sub_dim(self) -> int:
        return self.padded_dim // self.m

    def rotate(self, rows: np.ndarray) -> np.ndarray:
        x = np.asarray(rows, dtype=np.float64)
        if x.shape[-1] != self.padded_dim:
            padded = np.zeros(x.shape[:-1] + (self.padded_dim,))
            padded[..., : self.input_dim] = x
            x = padded
        return x @ self.rotation.T.astype(np.float64)


def _encode_rotated(rotated64: np.ndarray, codebooks: np.ndarray) -> np.ndarray:
    m, ks, sub = codebooks.shape
    n = rotated64.shape[0]
    codes = np.empty((n, m), dtype=np.uint8 if ks <= 256 else np.uint16)
    for j in range(m):
        seg = rotated64[:, j * sub : (j + 1) * sub]
        labels, _ = _assign(seg, codebooks[j].astype(np.float64))
        codes[:, j] = labels
    return codes


def encode(model: QuantModel, vset: VectorSet) -> np.ndarray:
    """Per-segment nearest-centroid indices for each vector, ties to the smaller index."""
    if vset.dim != model.input_dim:
        raise ValueError(f"dim {vset.dim} != model input dim {model.input_dim}")
    return _encode_rotated(model.rotate(vset.vectors), model.codebooks)


def reconstruct(model: QuantModel, codes: np.ndarray) -> np.ndarray:
    """Rotated-space reconstruction (concatenated codewords), float32 (n, padded_dim)."""
    n, m = codes.shape
    out = np.empty((n, model.padded_dim), dtype=np.float32)
    sub = model.sub_dim
    for j in range(m):
        out[:, j * sub : (j + 1) * sub] = model.codebooks[j][codes[:, j]]
    return out


def _rotated_distortion(rotated64: np.ndarray, codebooks: np.ndarray, codes: np.ndarray) -> float:
    m, ks, sub = codebooks.shape
    total = 0.0
    for j in range(m):
        seg = rotated64[:, j * sub : (j + 1) * sub]
        rec = codebooks[j].astype(np.float64)[codes[:, j]]
        total += float(((seg - rec) ** 2).sum())
    return total / rotated64.shape[0]


def fit_opq(training: VectorSet, m: int, ks: int = 256, t1: int = 20, t2: int = 20,
            seed: int = 0, alpha: float = 1.0, learn_rotation: bool = True,
            dataset: VectorSet | None = None) -> QuantModel:
    """Alternating codebook/rotation optimization, then codebook-only refinement.

    Each of the t1 iterations runs one clustering round per subspace on the
    rotated training data, encodes the training set, and refits the rotation as
    the orthogonal Procrustes solution between the original data and its
    reconstruction. t2 more clustering-only rounds follow with the rotation
    fixed. With learn_rotation=False this degenerates to plain product
    quantization. Finally `dataset` (default: the training set) is encoded.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if training.count < ks:
        raise ValueError(f"ks={ks} exceeds training count {training.count}")
    d = training.dim
    padded = ((d + m - 1) // m) * m
    sub = padded // m
    xp = np.zeros((training.count, padded))
    xp[:, :d] = training.vectors.astype(np.float64)
    rmat = np.eye(padded)  # row convention: rotated rows = rows @ rmat
    rng = np.random.default_rng(seed)
    centroids = [None] * m
    history: list[tuple[str, float]] = []

    def one_round(xr):
        for j in range(m):
            seg = xr[:, j * sub : (j + 1) * sub]
            if centroids[j] is None:
                centroids[j] = seg[rng.choice(training.count, size=ks, replace=False)].copy()
            labels, best = _assign(seg, centroids[j])
            counts = np.bincount(labels, minlength=ks)
            sums = np.zeros_like(centroids[j])
            np.add.at(sums, labels, seg)
            nonempty = counts > 0
            centroids[j][nonempty] = sums[nonempty] / counts[nonempty, None]
            for c in np.nonzero(~nonempty)[0]:
                far = int(np.argmax(best))
                centroids[j][c] = seg[far]
                best[far] = 0.0

    def encode_rotated(xr):
        codes = np.empty((training.count, m), dtype=np.int32)
        total = 0.0
        for j in range(m):
            seg = xr[:, j * sub : (j + 1) * sub]
            labels, best = _assign(seg, centroids[j])
            codes[:, j] = labels
            total += float(best.sum())
        return codes, total / training.count

    for _ in range(t1):
        xr = xp @ rmat
        one_round(xr)
        train_codes, distortion = encode_rotated(xr)
        history.append(("cluster", distortion))
        if not learn_rotation:
            continue
        recon = np.concatenate(
            [centroids[j][train_codes[:, j]] for j in range(m)], axis=1
        )
        u, _, vt = np.linalg.svd(xp.T @ recon)
        rmat = u @ vt
        history.append(("rotate", _rotated_distortion(xp @ rmat,
                                                      np.stack(centroids), train_codes)))
    for _ in range(t2):
        xr = xp @ rmat
        one_round(xr)
        _, distortion = encode_rotated(xr)
        history.append(("cluster", distortion))

    codebooks = np.stack(centroids).astype(np.float32)
    model = QuantModel(
        m=m,
        ks=ks,
        input_dim=d,
        padded_dim=padded,
        rotation=rmat.T.astype(np.float32),
        codebooks=codebooks,
        codes=np.empty((0, m), dtype=np.uint8),
        alpha=alpha,
        train_history=history,
    )
    target = dataset if dataset is not None else training
    model.codes = encode(model, target)
    return model


class OpqDco(Dco):
    """Quantization comparator: per-query distance table, per-candidate table lookups."""

    name = "opq"

    def __init__(self, model: QuantModel, dataset: VectorSet):
        super().__init__(dataset)
        if model.codes.shape[0] != dataset.count:
            raise ValueError("model codes do not cover the dataset")
        self.model = model
        self.prune_mult = float(model.alpha) ** 2
        self.params = f"m={model.m};ks={model.ks};alpha={model.alpha:g}"

    @classmethod
    def fit(cls, dataset: VectorSet, m: int = 8, ks: int = 256, t1: int = 20, t2: int = 20,
            seed: int = 0, alpha: float = 1.0, training: VectorSet | None = None) -> "OpqDco":
        model = fit_opq(training if training is not None else dataset, m, ks, t1, t2,
                        seed=seed, alpha=alpha, dataset=dataset)
        return cls(model, dataset)

    def _prepare(self, q, query_id):
        ctx = self._make_context(q, query_id)
        model = self.model
        qr = model.rotate(ctx.query[None, :])[0]
        sub = model.sub_dim
        segs = qr.reshape(model.m, sub)
        books = model.codebooks.astype(np.float64)
        diff = books - segs[:, None, :]
        ctx.adc_table = np.ascontiguousarray(np.einsum("mkd,mkd->mk", diff, diff))
        return ctx

    def compare(self, ctx, from_node, candidate, threshold_sq):
        st = ctx.stats
        st.comparisons += 1
        model = self.model
        approx = float(ctx.adc_table[np.arange(model.m), self.model.codes[candidate]].sum())
        st.dims_evaluated += model.m
        if approx > self.prune_mult * threshold_sq:
            st.pruned_count += 1
            return PRUNED
        d = squared_distance(ctx.query, self.dataset.vectors[candidate])
        st.dims_evaluated += self.dataset.dim
        st.full_dist_count += 1
        return CompareOutcome.admit(d)

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        return float(ctx.adc_table[np.arange(self.model.m), self.model.codes[candidate]].sum())

    def kernel_args(self, ctx):
        if self.model.codes.dtype != np.uint8:
            return None  # ks > 256 stays on the pure engine
        return {
            "family": 3,
            "codes": self.model.codes,
            "adc_table": ctx.adc_table,
            "prune_mult": self.prune_mult,
        }
