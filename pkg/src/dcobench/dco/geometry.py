"""Edge-geometry comparator: per-edge projection/residual decomposition with a
signed-random-projection estimate of the residual inner product.

For an edge c -> v, writing v = t_d c + d_res and q = t_q c + q_res (both
residuals orthogonal to c) gives

    dist^2(q, v) = (t_q||c|| - t_d||c||)^2 + ||q_res||^2 + ||d_res||^2
                   - 2 <q_res, d_res>,

where everything except the inner product is precomputed per edge/node or
computed once per hop. The inner product is estimated from the Hamming
distance h between sign bits of projected residuals as
||q_res|| ||d_res|| cos(pi h / L).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import VectorSet, squared_distance
from .base import PRUNED, CompareOutcome, Dco

__all__ = ["GeoModel", "fit_finger", "FingerDco"]


@dataclass
class GeoModel:
    """Per-node and per-edge geometry aligned with the index's level-0 adjacency slots."""

    l_bits: int
    proj: np.ndarray  # (L, D) float32 Gaussian
    cnorm2: np.ndarray  # (N,) float32 squared node norms
    pc: np.ndarray  # (N, L) float32 projected nodes
    td: np.ndarray  # (N, 2M) float32: t_d * ||c|| per edge slot
    dres: np.ndarray  # (N, 2M) float32: residual norm per edge slot
    bits: np.ndarray  # (N, 2M, W) uint64 residual sign bits
    alpha: float
    adjacency_fingerprint: int
    cos_table: np.ndarray  # (L+1,) float64

    @property
    def words(self) -> int:
        return self.bits.shape[2]


def _pack_signs(values: np.ndarray, l_bits: int) -> np.ndarray:
    """Pack sign bits (strictly positive -> 1) of (n, L) values into (n, W) uint64 words."""
    n = values.shape[0]
    nwords = (l_bits + 63) // 64
    words = np.zeros((n, nwords), dtype=np.uint64)
    positive = values > 0.0
    for l in range(l_bits):
        words[:, l >> 6] |= positive[:, l].astype(np.uint64) << np.uint64(l & 63)
    return words


def fit_finger(index, dataset: VectorSet, l_bits: int = 64, seed: int = 0,
               alpha: float = 1.5, edge_chunk: int = 200_000) -> GeoModel:
    """Precompute the decomposition for every level-0 edge of a built index."""
    if l_bits < 1:
        raise ValueError("l_bits must be >= 1")
    if index.count != dataset.count:
        raise ValueError("index and dataset sizes differ")
    x64 = dataset.vectors.astype(np.float64)
    n, d = x64.shape
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((l_bits, d))
    cnorm2 = np.einsum("ij,ij->i", x64, x64)
    pc = x64 @ proj.T

    cap = index.nbr0.shape[1]
    nwords = (l_bits + 63) // 64
    td = np.zeros((n, cap), dtype=np.float32)
    dres = np.zeros((n, cap), dtype=np.float32)
    bits = np.zeros((n, cap, nwords), dtype=np.uint64)

    slot_mask = np.arange(cap)[None, :] < index.cnt0[:, None]
    src_all = np.repeat(np.arange(n), index.cnt0)
    dst_all = index.nbr0[slot_mask]
    td_flat = np.empty(src_all.shape[0], dtype=np.float32)
    dres_flat = np.empty(src_all.shape[0], dtype=np.float32)
    bits_flat = np.empty((src_all.shape[0], nwords), dtype=np.uint64)
    for s in range(0, src_all.shape[0], edge_chunk):
        e = min(s + edge_chunk, src_all.shape[0])
        cs = x64[src_all[s:e]]
        vs = x64[dst_all[s:e]]
        cn2 = cnorm2[src_all[s:e]]
        safe = cn2 > 0.0
        t_d = np.where(safe, np.einsum("ij,ij->i", vs, cs) / np.where(safe, cn2, 1.0), 0.0)
        resid = vs - t_d[:, None] * cs
        td_flat[s:e] = t_d * np.sqrt(cn2)
        dres_flat[s:e] = np.sqrt(np.einsum("ij,ij->i", resid, resid))
        bits_flat[s:e] = _pack_signs(resid @ proj.T, l_bits)
    td[slot_mask] = td_flat
    dres[slot_mask] = dres_flat
    bits[slot_mask] = bits_flat

    return GeoModel(
        l_bits=l_bits,
        proj=proj.astype(np.float32),
        cnorm2=cnorm2.astype(np.float32),
        pc=pc.astype(np.float32),
        td=td,
        dres=dres,
        bits=bits,
        alpha=float(alpha),
        adjacency_fingerprint=index.adjacency_fingerprint(),
        cos_table=np.cos(np.pi * np.arange(l_bits + 1) / l_bits),
    )


class FingerDco(Dco):
    """Comparator reading per-edge geometry keyed by the hop-source node."""

    name = "finger"

    def __init__(self, model: GeoModel, dataset: VectorSet, index):
        super().__init__(dataset)
        if model.adjacency_fingerprint != index.adjacency_fingerprint():
            raise ValueError("geometry model was fitted for a different graph")
        self.model = model
        self.index = index
        self.prune_mult = float(model.alpha) ** 2
        self.params = f"l={model.l_bits};alpha={model.alpha:g}"

    @classmethod
    def fit(cls, index, dataset: VectorSet, l_bits: int = 64, seed: int = 0,
            alpha: float = 1.5) -> "FingerDco":
        return cls(fit_finger(index, dataset, l_bits, seed, alpha), dataset, index)

    def _prepare(self, q, query_id):
        ctx = self._make_context(q, query_id)
        q64 = ctx.query.astype(np.float64)
        ctx.finger_qnorm2 = float(np.dot(q64, q64))
        ctx.finger_pq = self.model.proj.astype(np.float64) @ q64
        return ctx

    def _hop_state(self, ctx, c: int, count_dims: bool = True):
        state = ctx.hop_cache.get(c)
        if state is not None:
            return state
        model = self.model
        cn2 = float(model.cnorm2[c])
        if cn2 <= 0.0:
            state = None
        else:
            q64 = ctx.query.astype(np.float64)
            tq = float(np.dot(q64, self.dataset.vectors[c].astype(np.float64))) / cn2
            tqn = tq * np.sqrt(cn2)
            qres2 = max(ctx.finger_qnorm2 - tqn * tqn, 0.0)
            qbits = _pack_signs(
                (ctx.finger_pq - tq * model.pc[c].astype(np.float64))[None, :], model.l_bits
            )[0]
            state = (tqn, qres2, np.sqrt(qres2), qbits)
            if count_dims:
                ctx.stats.dims_evaluated += self.dataset.dim
        ctx.hop_cache[c] = state
        return state

    def _edge_slot(self, from_node: int, candidate: int) -> int | None:
        row = self.index.nbr0[from_node, : self.index.cnt0[from_node]]
        hits = np.nonzero(row == candidate)[0]
        return int(hits[0]) if hits.size else None

    def _estimate_from_slot(self, state, from_node: int, slot: int) -> float:
        model = self.model
        tqn, qres2, qres, qbits = state
        td = float(model.td[from_node, slot])
        dr = float(model.dres[from_node, slot])
        h = 0
        for w in range(model.words):
            h += int(qbits[w] ^ model.bits[from_node, slot, w]).bit_count()
        return (tqn - td) ** 2 + qres2 + dr * dr - 2.0 * qres * dr * float(model.cos_table[h])

    def compare(self, ctx, from_node, candidate, threshold_sq):
        st = ctx.stats
        st.comparisons += 1
        state = self._hop_state(ctx, from_node)
        slot = None if state is None else self._edge_slot(from_node, candidate)
        if state is None or slot is None:
            # degenerate hop source or missing edge metadata: unpruned full distance
            d = squared_distance(ctx.query, self.dataset.vectors[candidate])
            st.dims_evaluated += self.dataset.dim
            st.full_dist_count += 1
            return CompareOutcome.admit(d)
        est = self._estimate_from_slot(state, from_node, slot)
        st.dims_evaluated += self.model.l_bits
        if est > self.prune_mult * threshold_sq:
            st.pruned_count += 1
            return PRUNED
        d = squared_distance(ctx.query, self.dataset.vectors[candidate])
        st.dims_evaluated += self.dataset.dim
        st.full_dist_count += 1
        return CompareOutcome.admit(d)

    def estimate_sq(self, ctx, candidate, fraction=None, from_node=None):
        if from_node is None:
            raise ValueError("edge-geometry estimates need the hop source node")
        state = self._hop_state(ctx, from_node, count_dims=False)
        slot = None if state is None else self._edge_slot(from_node, candidate)
        if state is None or slot is None:
            return squared_distance(ctx.query, self.dataset.vectors[candidate])
        return self._estimate_from_slot(state, from_node, slot)

    def estimate_sq_exact_ip(self, ctx, candidate, from_node) -> float:
        """The estimate with the exact residual inner product in place of the sign-bit
        approximation; isolates all estimation error to the cosine term."""
        state = self._hop_state(ctx, from_node, count_dims=False)
        slot = None if state is None else self._edge_slot(from_node, candidate)
        if state is None or slot is None:
            return squared_distance(ctx.query, self.dataset.vectors[candidate])
        model = self.model
        tqn, qres2, qres, _ = state
        td = float(model.td[from_node, slot])
        dr = float(model.dres[from_node, slot])
        c64 = self.dataset.vectors[from_node].astype(np.float64)
        v64 = self.dataset.vectors[candidate].astype(np.float64)
        q64 = ctx.query.astype(np.float64)
        cn2 = float(model.cnorm2[from_node])
        t_d = float(np.dot(v64, c64)) / cn2
        t_q = float(np.dot(q64, c64)) / cn2
        ip = float(np.dot(q64 - t_q * c64, v64 - t_d * c64))
        return (tqn - td) ** 2 + qres2 + dr * dr - 2.0 * ip

    def kernel_args(self, ctx):
        model = self.model
        return {
            "family": 4,
            "f_cnorm2": model.cnorm2,
            "f_pc": model.pc,
            "f_td": model.td,
            "f_dres": model.dres,
            "f_bits": model.bits,
            "f_qnorm2": ctx.finger_qnorm2,
            "f_pq": ctx.finger_pq,
            "cos_table": model.cos_table,
            "prune_mult": self.prune_mult,
        }
