"""Pure-Python/numpy engine: reference implementation of graph build and beam search.

This is the fallback used when the compiled extension is unavailable, and the
path every user-defined comparator takes (one ``compare`` call per candidate).
The compiled engine in ``_core`` must match its semantics.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..dco.base import Dco, QueryContext, SearchStats


def _sqdist(a64: np.ndarray, b32: np.ndarray) -> float:
    d = a64 - b32
    return float(np.dot(d, d))


def _greedy_descent(data, index, q64, cur, cur_d, top_level, stop_level):
    """Greedy single-entry descent with exact distances, from top_level down to stop_level+1."""
    for lev in range(top_level, stop_level, -1):
        changed = True
        while changed:
            changed = False
            for v in index.neighbors(cur, lev):
                dv = _sqdist(q64, data[v])
                if dv < cur_d:
                    cur_d = dv
                    cur = int(v)
                    changed = True
    return cur, cur_d


def _search_layer_exact(data, index, q64, entry, entry_dist, ef, level, visited, epoch):
    """Exact-distance beam over one level: ascending (dist, id) list of up to ef results."""
    visited[entry] = epoch
    cand = [(entry_dist, entry)]
    results = [(-entry_dist, entry)]
    while cand:
        cd, c = heapq.heappop(cand)
        if len(results) == ef and cd > -results[0][0]:
            break
        fresh = [int(v) for v in index.neighbors(c, level) if visited[v] != epoch]
        for v in fresh:
            visited[v] = epoch
        if not fresh:
            continue
        diffs = q64 - data[fresh]
        dists = np.einsum("ij,ij->i", diffs, diffs)
        for v, dv in zip(fresh, dists):
            dv = float(dv)
            if len(results) < ef or dv < -results[0][0]:
                heapq.heappush(cand, (dv, v))
                heapq.heappush(results, (-dv, v))
                if len(results) > ef:
                    heapq.heappop(results)
    out = sorted((-nd, v) for nd, v in results)
    return out


def _select_heuristic(data, base_vec64, cands, m):
    """Diversified neighbor selection: keep c only if it is closer to the base than
    to every already-selected neighbor."""
    selected = []
    for d, c in cands:
        if len(selected) == m:
            break
        good = True
        cv = data[c].astype(np.float64)
        for _, s in selected:
            if _sqdist(cv, data[s]) <= d:
                good = False
                break
        if good:
            selected.append((d, c))
    return selected


def build(data: np.ndarray, m: int, ef_construction: int, levels: np.ndarray, index) -> tuple[int, int]:
    """Insert all rows of data into the (empty) adjacency arrays of index.

    Returns (entry_point, max_level). Sequential and deterministic.
    """
    n = data.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    epoch = 0
    entry, max_level = 0, int(levels[0])
    max0 = 2 * m
    for i in range(1, n):
        l_i = int(levels[i])
        q64 = data[i].astype(np.float64)
        cur = entry
        cur_d = _sqdist(q64, data[cur])
        if max_level > l_i:
            cur, cur_d = _greedy_descent(data, index, q64, cur, cur_d, max_level, l_i)
        for lev in range(min(l_i, max_level), -1, -1):
            epoch += 1
            cands = _search_layer_exact(data, index, q64, cur, cur_d, ef_construction,
                                        lev, visited, epoch)
            selected = _select_heuristic(data, q64, cands, m)
            cap = max0 if lev == 0 else m
            index.set_neighbors(i, lev, [c for _, c in selected])
            for d_sc, s in selected:
                nbrs = index.neighbors(s, lev)
                if len(nbrs) < cap:
                    index.append_neighbor(s, lev, i)
                else:
                    s64 = data[s].astype(np.float64)
                    pool = [(_sqdist(s64, data[v]), int(v)) for v in nbrs]
                    pool.append((d_sc, i))
                    pool.sort()
                    keep = _select_heuristic(data, s64, pool, cap)
                    index.set_neighbors(s, lev, [c for _, c in keep])
            cur, cur_d = selected[0][1], selected[0][0]
        if l_i > max_level:
            entry = i
            max_level = l_i
    return entry, max_level


def search(index, dco: Dco, ctx: QueryContext, k: int, ef: int, audit: bool) -> tuple[np.ndarray, np.ndarray]:
    """Beam search at level 0 with the comparator at the admission test.

    Results (ids, squared distances) ascending; counters accumulate in ctx.stats.
    """
    data = index.dataset.vectors
    stats: SearchStats = ctx.stats
    q64 = ctx.query.astype(np.float64)
    entry = index.entry_point
    cur_d = _sqdist(q64, data[entry])
    cur, cur_d = _greedy_descent(data, index, q64, entry, cur_d, index.max_level, 0)

    n = data.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    visited[cur] = 1
    cand = [(cur_d, cur)]
    results = [(-cur_d, cur)]
    if audit and stats.false_negatives is None:
        stats.false_negatives = 0
    while cand:
        cd, c = heapq.heappop(cand)
        if len(results) == ef and cd > -results[0][0]:
            break
        stats.hops += 1
        for v in index.neighbors(c, 0):
            v = int(v)
            if visited[v]:
                continue
            visited[v] = 1
            threshold = -results[0][0] if len(results) == ef else float("inf")
            outcome = dco.compare(ctx, c, v, threshold)
            if outcome.pruned:
                if audit:
                    exact = dco.exact_sq(ctx, v)
                    if threshold >= exact:
                        stats.false_negatives += 1
                continue
            dv = outcome.dist_sq
            if len(results) < ef or dv < threshold:
                heapq.heappush(cand, (dv, v))
                heapq.heappush(results, (-dv, v))
                if len(results) > ef:
                    heapq.heappop(results)
    out = sorted((-nd, v) for nd, v in results)[:k]
    ids = np.array([v for _, v in out], dtype=np.int64)
    dists = np.array([d for d, _ in out], dtype=np.float64)
    return ids, dists
