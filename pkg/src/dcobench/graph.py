"""HNSW index construction, persistence, and the instrumented greedy beam search."""

from __future__ import annotations

import math
import os
import struct
import threading
import time
import zlib
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _kernels
from ._kernels import pure
from .data import VectorSet
from .dco.base import Dco, SearchStats

__all__ = ["GraphIndex", "SearchResult", "build_hnsw", "beam_search"]

_INDEX_MAGIC = b"DCOBGRPH"
_INDEX_VERSION = 1


@dataclass
class GraphIndex:
    """Layered proximity graph over a vector payload.

    Level-0 adjacency is a fixed-capacity (N, 2M) table; levels >= 1 are packed
    into per-node blocks of M slots (node i owns levels[i] blocks starting at
    block_off[i]). The payload `dataset` may be swapped for an isometric copy
    via with_dataset(); `dataset_fingerprint` always identifies the vectors the
    graph was built on.
    """

    m: int
    ef_construction: int
    seed: int
    entry_point: int
    max_level: int
    levels: np.ndarray  # (N,) int32
    nbr0: np.ndarray  # (N, 2M) int32
    cnt0: np.ndarray  # (N,) int32
    upper: np.ndarray  # (B, M) int32
    upper_cnt: np.ndarray  # (B,) int32
    block_off: np.ndarray  # (N,) int64
    dataset: VectorSet
    dataset_fingerprint: int

    @property
    def count(self) -> int:
        return self.levels.shape[0]

    def neighbors(self, node: int, level: int) -> np.ndarray:
        if level == 0:
            return self.nbr0[node, : self.cnt0[node]]
        blk = self.block_off[node] + level - 1
        return self.upper[blk, : self.upper_cnt[blk]]

    def set_neighbors(self, node: int, level: int, ids) -> None:
        k = len(ids)
        if level == 0:
            self.nbr0[node, :k] = ids
            self.cnt0[node] = k
        else:
            blk = self.block_off[node] + level - 1
            self.upper[blk, :k] = ids
            self.upper_cnt[blk] = k

    def append_neighbor(self, node: int, level: int, nid: int) -> None:
        if level == 0:
            self.nbr0[node, self.cnt0[node]] = nid
            self.cnt0[node] += 1
        else:
            blk = self.block_off[node] + level - 1
            self.upper[blk, self.upper_cnt[blk]] = nid
            self.upper_cnt[blk] += 1

    def with_dataset(self, dataset: VectorSet) -> "GraphIndex":
        """Rebind the graph to an isometric payload (e.g. a norm-preserving transform of it)."""
        if dataset.count != self.count:
            raise ValueError(f"payload count {dataset.count} != index count {self.count}")
        return replace(self, dataset=dataset)

    def adjacency_fingerprint(self) -> int:
        """CRC of the level-0 adjacency; ties edge-aligned models to this exact graph."""
        crc = zlib.crc32(np.ascontiguousarray(self.cnt0).tobytes())
        crc = zlib.crc32(np.ascontiguousarray(self.nbr0).tobytes(), crc)
        return crc & 0xFFFFFFFF

    def validate(self) -> None:
        """Check structural invariants; raises AssertionError on violation."""
        n = self.count
        assert self.cnt0.max(initial=0) <= 2 * self.m
        for node in range(n):
            nbrs = self.neighbors(node, 0)
            assert node not in nbrs, f"self-loop at node {node}"
            assert len(set(nbrs.tolist())) == len(nbrs)
            assert np.all((nbrs >= 0) & (nbrs < n))
            for lev in range(1, int(self.levels[node]) + 1):
                nbrs = self.neighbors(node, lev)
                assert len(nbrs) <= self.m
                assert node not in nbrs
                assert np.all(self.levels[nbrs] >= lev), f"level-{lev} edge to lower node"
        assert self.levels[self.entry_point] == self.max_level

    def save(self, path: str | os.PathLike) -> None:
        n = self.count
        header = _INDEX_MAGIC + struct.pack(
            "<IIQIIIQQII",
            _INDEX_VERSION,
            self.dataset.dim,
            n,
            self.m,
            self.ef_construction,
            self.max_level,
            self.entry_point,
            self.seed,
            self.dataset_fingerprint,
            0,
        )
        with open(os.fspath(path), "wb") as f:
            f.write(header)
            self.levels.astype("<i4").tofile(f)
            self.cnt0.astype("<i4").tofile(f)
            self.nbr0.astype("<i4").tofile(f)
            self.upper_cnt.astype("<i4").tofile(f)
            self.upper.astype("<i4").tofile(f)

    @classmethod
    def load(cls, path: str | os.PathLike, dataset: VectorSet) -> "GraphIndex":
        with open(os.fspath(path), "rb") as f:
            magic = f.read(8)
            if magic != _INDEX_MAGIC:
                raise ValueError(f"{path}: not an index file (bad magic)")
            fmt = "<IIQIIIQQII"
            version, dim, n, m, efc, max_level, entry, seed, fp, _pad = struct.unpack(
                fmt, f.read(struct.calcsize(fmt))
            )
            if version != _INDEX_VERSION:
                raise ValueError(f"{path}: unsupported index version {version}")
            if dataset.count != n or dataset.dim != dim:
                raise ValueError(
                    f"{path}: index is for {n}x{dim} data, got {dataset.count}x{dataset.dim}"
                )
            if dataset.fingerprint() != fp:
                raise ValueError(f"{path}: dataset fingerprint mismatch")
            levels = np.fromfile(f, dtype="<i4", count=n).astype(np.int32)
            cnt0 = np.fromfile(f, dtype="<i4", count=n).astype(np.int32)
            nbr0 = np.fromfile(f, dtype="<i4", count=n * 2 * m).astype(np.int32).reshape(n, 2 * m)
            blocks = int(levels.sum())
            upper_cnt = np.fromfile(f, dtype="<i4", count=blocks).astype(np.int32)
            upper = np.fromfile(f, dtype="<i4", count=blocks * m).astype(np.int32).reshape(blocks, m)
        block_off = np.zeros(n, dtype=np.int64)
        np.cumsum(levels[:-1], out=block_off[1:])
        return cls(
            m=m,
            ef_construction=efc,
            seed=seed,
            entry_point=entry,
            max_level=max_level,
            levels=levels,
            nbr0=nbr0,
            cnt0=cnt0,
            upper=upper,
            upper_cnt=upper_cnt,
            block_off=block_off,
            dataset=dataset,
            dataset_fingerprint=fp,
        )


class SearchResult(NamedTuple):
    ids: np.ndarray  # ascending by distance
    distances: np.ndarray  # squared L2 in the search space
    stats: SearchStats


def _draw_levels(n: int, m: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(n)  # (0, 1]
    mult = 1.0 / math.log(m)
    return np.floor(-np.log(u) * mult).astype(np.int32)


def build_hnsw(dataset: VectorSet, m: int, ef_construction: int, seed: int = 0,
               engine: str | None = None) -> GraphIndex:
    """Construct an HNSW graph over the dataset with exact distances.

    Node levels are geometric with normalization 1/ln(M); neighbor lists use the
    diversified selection rule. Deterministic for a fixed seed and engine.
    """
    if dataset.count < 1:
        raise ValueError("dataset must be non-empty")
    if m < 2:
        raise ValueError("M must be >= 2")
    if ef_construction < m:
        raise ValueError("ef_construction must be >= M")
    engine = _kernels.resolve_engine(engine)
    n = dataset.count
    levels = _draw_levels(n, m, seed)
    block_off = np.zeros(n, dtype=np.int64)
    np.cumsum(levels[:-1], out=block_off[1:])
    blocks = int(levels.sum())
    index = GraphIndex(
        m=m,
        ef_construction=ef_construction,
        seed=seed,
        entry_point=0,
        max_level=int(levels[0]),
        levels=levels,
        nbr0=np.full((n, 2 * m), -1, dtype=np.int32),
        cnt0=np.zeros(n, dtype=np.int32),
        upper=np.full((max(blocks, 1), m), -1, dtype=np.int32),
        upper_cnt=np.zeros(max(blocks, 1), dtype=np.int32),
        block_off=block_off,
        dataset=dataset,
        dataset_fingerprint=dataset.fingerprint(),
    )
    if n == 1:
        return index
    if engine == "compiled":
        entry, max_level = _kernels._core.build_graph(
            dataset.vectors, m, ef_construction, levels,
            index.nbr0, index.cnt0, index.upper, index.upper_cnt, block_off,
        )
    else:
        entry, max_level = pure.build(dataset.vectors, m, ef_construction, levels, index)
    index.entry_point = int(entry)
    index.max_level = int(max_level)
    return index


_workspaces = threading.local()


def _workspace(n: int, ef: int):
    """Reusable per-thread visited/heap buffers for the compiled engine."""
    ws = getattr(_workspaces, "ws", None)
    if ws is None or ws["n"] != n:
        ws = {
            "n": n,
            "visited": np.zeros(n, dtype=np.int32),
            "epoch": 0,
            "cand_d": np.empty(n + 1, dtype=np.float64),
            "cand_v": np.empty(n + 1, dtype=np.int64),
        }
        _workspaces.ws = ws
    ws["epoch"] += 1
    if ws["epoch"] >= 2**31 - 1:
        ws["visited"][:] = 0
        ws["epoch"] = 1
    return ws


def beam_search(index: GraphIndex, query: np.ndarray, k: int, ef: int, dco: Dco,
                audit: bool = False, engine: str | None = None,
                query_id: int | None = None) -> SearchResult:
    """Greedy beam search with the comparator at the admission test.

    `query` is a raw vector in the original data space; the comparator's
    preprocessing maps it into the search space carried by the index payload.
    Audit mode additionally computes exact distances of pruned candidates to
    count false negatives; audit runs must not be used for timing.
    """
    if k > ef:
        raise ValueError(f"k={k} must be <= ef={ef}")
    if index.dataset is not dco.search_dataset and (
        index.dataset.fingerprint() != dco.search_dataset.fingerprint()
    ):
        raise ValueError("index payload does not match the comparator's search dataset")
    engine = _kernels.resolve_engine(engine)
    t0 = time.perf_counter()
    ctx = dco.preprocess_query(np.asarray(query), query_id=query_id)
    kargs = dco.kernel_args(ctx) if engine == "compiled" else None
    if kargs is not None:
        ws = _workspace(index.count, ef)
        ids, dists, comps, dims, full, pruned, fn, hops = _kernels._core.beam_search(
            index.dataset.vectors, index.nbr0, index.cnt0,
            index.upper, index.upper_cnt, index.block_off,
            index.entry_point, index.max_level,
            ctx.query, k, ef,
            audit=audit, visited=ws["visited"], epoch=ws["epoch"],
            cand_d=ws["cand_d"], cand_v=ws["cand_v"],
            **kargs,
        )
        st = ctx.stats
        st.comparisons += int(comps)
        st.dims_evaluated += int(dims)
        st.full_dist_count += int(full)
        st.pruned_count += int(pruned)
        st.hops += int(hops)
        if audit:
            st.false_negatives = (st.false_negatives or 0) + int(fn)
    else:
        ids, dists = pure.search(index, dco, ctx, k, ef, audit)
    ctx.stats.elapsed_s = time.perf_counter() - t0
    return SearchResult(ids=ids, distances=dists, stats=ctx.stats)
