# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled engine: graph construction and beam search with inlined comparator kernels.

Semantics mirror the pure-Python engine in ``pure.py``; distances accumulate in
float64 over float32 inputs, sequentially, so a completed blocked partial sum is
bit-identical to the plain full-distance loop.
"""

import numpy as np

from libc.math cimport INFINITY, sqrt

cdef extern from *:
    """
    #define POPCOUNTLL(x) __builtin_popcountll(x)
    """
    int POPCOUNTLL(unsigned long long x) nogil


# ---------------------------------------------------------------------------
# primitives

cdef inline double _sqdist(const float* a, const float* b, Py_ssize_t d) nogil:
    cdef double acc = 0.0
    cdef double t
    cdef Py_ssize_t i
    for i in range(d):
        t = <double> (a[i] - b[i])
        acc += t * t
    return acc


cdef inline double _dot64(const float* a, const float* b, Py_ssize_t d) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(d):
        acc += (<double> a[i]) * (<double> b[i])
    return acc


cdef inline int _hpush(double* hd, long* hv, int size, double d, long v) nogil:
    """Min-heap push; returns the new size."""
    cdef int i = size
    cdef int p
    cdef double td
    cdef long tv
    hd[i] = d
    hv[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if hd[p] <= hd[i]:
            break
        td = hd[p]; hd[p] = hd[i]; hd[i] = td
        tv = hv[p]; hv[p] = hv[i]; hv[i] = tv
        i = p
    return size + 1


cdef inline int _hpop(double* hd, long* hv, int size) nogil:
    """Min-heap pop of the root; returns the new size."""
    cdef int i = 0
    cdef int c
    cdef double td
    cdef long tv
    size -= 1
    hd[0] = hd[size]
    hv[0] = hv[size]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and hd[c + 1] < hd[c]:
            c += 1
        if hd[i] <= hd[c]:
            break
        td = hd[i]; hd[i] = hd[c]; hd[c] = td
        tv = hv[i]; hv[i] = hv[c]; hv[c] = tv
        i = c
    return size


# ---------------------------------------------------------------------------
# shared graph walking

cdef inline long _descend(const float[:, ::1] data,
                          const int[:, ::1] upper, const int[::1] upper_cnt,
                          const long[::1] block_off,
                          const float* q, long cur, double* cur_d,
                          int top_level, int stop_level) nogil:
    """Greedy exact-distance descent from top_level down to stop_level + 1."""
    cdef Py_ssize_t d = data.shape[1]
    cdef int lev, s, changed
    cdef long blk, v
    cdef double dv
    for lev in range(top_level, stop_level, -1):
        changed = 1
        while changed:
            changed = 0
            blk = block_off[cur] + lev - 1
            for s in range(upper_cnt[blk]):
                v = upper[blk, s]
                dv = _sqdist(q, &data[v, 0], d)
                if dv < cur_d[0]:
                    cur_d[0] = dv
                    cur = v
                    changed = 1
    return cur


cdef int _search_layer_exact(const float[:, ::1] data,
                             const int[:, ::1] nbr0, const int[::1] cnt0,
                             const int[:, ::1] upper, const int[::1] upper_cnt,
                             const long[::1] block_off,
                             int level, const float* q, long entry, double entry_dist,
                             int ef, int* visited, int epoch,
                             double* c_d, long* c_v, double* r_d, long* r_v,
                             double* out_d, long* out_v) nogil:
    """Exact beam over one level (construction). Fills out_* ascending; returns count."""
    cdef Py_ssize_t d = data.shape[1]
    cdef int csize = 0, rsize = 0, cnt, s, i
    cdef long c, v, blk
    cdef double cd, dv, lower
    visited[entry] = epoch
    csize = _hpush(c_d, c_v, csize, entry_dist, entry)
    rsize = _hpush(r_d, r_v, rsize, -entry_dist, entry)
    while csize > 0:
        cd = c_d[0]
        c = c_v[0]
        if rsize == ef and cd > -r_d[0]:
            break
        csize = _hpop(c_d, c_v, csize)
        if level == 0:
            cnt = cnt0[c]
        else:
            blk = block_off[c] + level - 1
            cnt = upper_cnt[blk]
        for s in range(cnt):
            if level == 0:
                v = nbr0[c, s]
            else:
                v = upper[blk, s]
            if visited[v] == epoch:
                continue
            visited[v] = epoch
            dv = _sqdist(q, &data[v, 0], d)
            if rsize < ef or dv < -r_d[0]:
                csize = _hpush(c_d, c_v, csize, dv, v)
                rsize = _hpush(r_d, r_v, rsize, -dv, v)
                if rsize > ef:
                    rsize = _hpop(r_d, r_v, rsize)
    cnt = rsize
    for i in range(cnt - 1, -1, -1):
        out_d[i] = -r_d[0]
        out_v[i] = r_v[0]
        rsize = _hpop(r_d, r_v, rsize)
    return cnt


cdef int _select_heuristic(const float[:, ::1] data, int m,
                           const double* cand_d, const long* cand_v, int ncand,
                           double* sel_d, long* sel_v) nogil:
    """Keep candidate c (ascending order) only if dist(c, base) < dist(c, s) for all kept s."""
    cdef Py_ssize_t dim = data.shape[1]
    cdef int nsel = 0, i, j, good
    cdef long c
    cdef double d
    for i in range(ncand):
        if nsel == m:
            break
        d = cand_d[i]
        c = cand_v[i]
        good = 1
        for j in range(nsel):
            if _sqdist(&data[c, 0], &data[sel_v[j], 0], dim) <= d:
                good = 0
                break
        if good:
            sel_d[nsel] = d
            sel_v[nsel] = c
            nsel += 1
    return nsel


# ---------------------------------------------------------------------------
# construction

def build_graph(const float[:, ::1] data, int m, int ef_construction,
                const int[::1] levels,
                int[:, ::1] nbr0, int[::1] cnt0,
                int[:, ::1] upper, int[::1] upper_cnt,
                const long[::1] block_off):
    """Sequential HNSW insertion over preassigned levels. Returns (entry_point, max_level)."""
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t dim = data.shape[1]
    cdef int max0 = 2 * m
    cdef long entry = 0
    cdef int max_level = levels[0]

    visited_arr = np.zeros(n, dtype=np.int32)
    cdef int[::1] visited = visited_arr
    cdef int epoch = 0

    cand_d_arr = np.empty(n + 1, dtype=np.float64)
    cand_v_arr = np.empty(n + 1, dtype=np.int64)
    res_d_arr = np.empty(ef_construction + 2, dtype=np.float64)
    res_v_arr = np.empty(ef_construction + 2, dtype=np.int64)
    out_d_arr = np.empty(ef_construction + 2, dtype=np.float64)
    out_v_arr = np.empty(ef_construction + 2, dtype=np.int64)
    sel_d_arr = np.empty(m + 1, dtype=np.float64)
    sel_v_arr = np.empty(m + 1, dtype=np.int64)
    pool_d_arr = np.empty(2 * m + 2, dtype=np.float64)
    pool_v_arr = np.empty(2 * m + 2, dtype=np.int64)
    keep_d_arr = np.empty(2 * m + 2, dtype=np.float64)
    keep_v_arr = np.empty(2 * m + 2, dtype=np.int64)

    cdef double[::1] c_d = cand_d_arr
    cdef long[::1] c_v = cand_v_arr
    cdef double[::1] r_d = res_d_arr
    cdef long[::1] r_v = res_v_arr
    cdef double[::1] o_d = out_d_arr
    cdef long[::1] o_v = out_v_arr
    cdef double[::1] s_d = sel_d_arr
    cdef long[::1] s_v = sel_v_arr
    cdef double[::1] p_d = pool_d_arr
    cdef long[::1] p_v = pool_v_arr
    cdef double[::1] k_d = keep_d_arr
    cdef long[::1] k_v = keep_v_arr

    cdef long i, cur, s, v, blk
    cdef int l_i, lev, ncand, nsel, cap, cnt, j, nkeep, t
    cdef double cur_d, d_sc

    for i in range(1, n):
        l_i = levels[i]
        cur = entry
        cur_d = _sqdist(&data[i, 0], &data[cur, 0], dim)
        if max_level > l_i:
            cur = _descend(data, upper, upper_cnt, block_off, &data[i, 0],
                           cur, &cur_d, max_level, l_i)
        lev = l_i if l_i < max_level else max_level
        while lev >= 0:
            epoch += 1
            ncand = _search_layer_exact(data, nbr0, cnt0, upper, upper_cnt, block_off,
                                        lev, &data[i, 0], cur, cur_d, ef_construction,
                                        &visited[0], epoch,
                                        &c_d[0], &c_v[0], &r_d[0], &r_v[0],
                                        &o_d[0], &o_v[0])
            nsel = _select_heuristic(data, m, &o_d[0], &o_v[0], ncand, &s_d[0], &s_v[0])
            cap = max0 if lev == 0 else m
            # edges of the new node
            if lev == 0:
                cnt0[i] = nsel
                for j in range(nsel):
                    nbr0[i, j] = <int> s_v[j]
            else:
                blk = block_off[i] + lev - 1
                upper_cnt[blk] = nsel
                for j in range(nsel):
                    upper[blk, j] = <int> s_v[j]
            # reverse edges, with diversified shrink on overflow
            for j in range(nsel):
                s = s_v[j]
                d_sc = s_d[j]
                if lev == 0:
                    cnt = cnt0[s]
                else:
                    blk = block_off[s] + lev - 1
                    cnt = upper_cnt[blk]
                if cnt < cap:
                    if lev == 0:
                        nbr0[s, cnt] = <int> i
                        cnt0[s] = cnt + 1
                    else:
                        upper[blk, cnt] = <int> i
                        upper_cnt[blk] = cnt + 1
                else:
                    for t in range(cnt):
                        if lev == 0:
                            v = nbr0[s, t]
                        else:
                            v = upper[blk, t]
                        p_d[t] = _sqdist(&data[s, 0], &data[v, 0], dim)
                        p_v[t] = v
                    p_d[cnt] = d_sc
                    p_v[cnt] = i
                    _sort_pairs(&p_d[0], &p_v[0], cnt + 1)
                    nkeep = _select_heuristic(data, cap, &p_d[0], &p_v[0], cnt + 1,
                                              &k_d[0], &k_v[0])
                    if lev == 0:
                        cnt0[s] = nkeep
                        for t in range(nkeep):
                            nbr0[s, t] = <int> k_v[t]
                    else:
                        upper_cnt[blk] = nkeep
                        for t in range(nkeep):
                            upper[blk, t] = <int> k_v[t]
            cur = s_v[0]
            cur_d = s_d[0]
            lev -= 1
        if l_i > max_level:
            entry = i
            max_level = l_i
    return entry, max_level


cdef void _sort_pairs(double* d, long* v, int n) nogil:
    """Insertion sort ascending by distance (n is small: at most 2M + 1)."""
    cdef int i, j
    cdef double td
    cdef long tv
    for i in range(1, n):
        td = d[i]
        tv = v[i]
        j = i - 1
        while j >= 0 and d[j] > td:
            d[j + 1] = d[j]
            v[j + 1] = v[j]
            j -= 1
        d[j + 1] = td
        v[j + 1] = tv


# ---------------------------------------------------------------------------
# query-time beam search with inlined comparator families

FAMILY_EXACT = 0
FAMILY_TRANSFORM = 1
FAMILY_PROJECTION = 2
FAMILY_ADC = 3
FAMILY_FINGER = 4


def beam_search(const float[:, ::1] data,
                const int[:, ::1] nbr0, const int[::1] cnt0,
                const int[:, ::1] upper, const int[::1] upper_cnt,
                const long[::1] block_off,
                long entry, int max_level,
                const float[::1] q,
                int k, int ef, int family,
                # transform family
                int delta_d=0, const double[::1] block_factors=None,
                # projection family
                const float[:, ::1] proj_data=None, const float[::1] proj_q=None,
                double prune_mult=0.0,
                # quantization family
                const unsigned char[:, ::1] codes=None, const double[:, ::1] adc_table=None,
                # geometry family
                const float[::1] f_cnorm2=None, const float[:, ::1] f_pc=None,
                const float[:, ::1] f_td=None, const float[:, ::1] f_dres=None,
                const unsigned long long[:, :, ::1] f_bits=None,
                double f_qnorm2=0.0, const double[::1] f_pq=None,
                const double[::1] cos_table=None,
                bint audit=False,
                int[::1] visited=None, int epoch=1,
                double[::1] cand_d=None, long[::1] cand_v=None):
    """Greedy beam search at level 0 with the admission test inlined per family.

    Returns (ids, dists, comparisons, dims, full_dist, pruned, false_neg, hops).
    """
    cdef Py_ssize_t dim = data.shape[1]
    cdef long n = data.shape[0]
    cdef long cur = entry
    cdef double cur_d = _sqdist(&q[0], &data[cur, 0], dim)
    cur = _descend(data, upper, upper_cnt, block_off, &q[0], cur, &cur_d, max_level, 0)

    res_d_arr = np.empty(ef + 2, dtype=np.float64)
    res_v_arr = np.empty(ef + 2, dtype=np.int64)
    cdef double[::1] r_d = res_d_arr
    cdef long[::1] r_v = res_v_arr
    cdef int rsize = 0, csize = 0

    # counters
    cdef long comparisons = 0, dims = 0, full_cnt = 0, pruned_cnt = 0, fn_cnt = 0, hops = 0

    # per-family locals
    cdef int pruned, nseg = 0, dproj = 0, l_bits = 0, nwords = 0
    cdef double partial, thr, dv, est, approx, s_est
    cdef Py_ssize_t pos, end, bi, i, w
    cdef long c, v
    cdef int cnt, s_i
    # finger per-hop cache
    cdef double hop_tqn = 0.0, hop_qres2 = 0.0, hop_qres = 0.0, tq, val
    cdef int hop_state
    cdef unsigned long long[::1] qbits = None
    cdef unsigned long long word
    cdef int h

    if family == FAMILY_ADC:
        nseg = codes.shape[1]
    elif family == FAMILY_PROJECTION:
        dproj = proj_data.shape[1]
    elif family == FAMILY_FINGER:
        l_bits = f_pc.shape[1]
        nwords = f_bits.shape[2]
        qbits = np.zeros(nwords, dtype=np.uint64)

    visited[cur] = epoch
    csize = _hpush(&cand_d[0], &cand_v[0], csize, cur_d, cur)
    rsize = _hpush(&r_d[0], &r_v[0], rsize, -cur_d, cur)

    while csize > 0:
        cur_d = cand_d[0]
        c = cand_v[0]
        if rsize == ef and cur_d > -r_d[0]:
            break
        csize = _hpop(&cand_d[0], &cand_v[0], csize)
        hops += 1
        hop_state = 0
        cnt = cnt0[c]
        for s_i in range(cnt):
            v = nbr0[c, s_i]
            if visited[v] == epoch:
                continue
            visited[v] = epoch
            thr = -r_d[0] if rsize == ef else INFINITY
            comparisons += 1
            pruned = 0
            dv = 0.0

            if family == FAMILY_EXACT:
                dv = _sqdist(&q[0], &data[v, 0], dim)
                full_cnt += 1
                dims += dim

            elif family == FAMILY_TRANSFORM:
                partial = 0.0
                pos = 0
                bi = 0
                while pos < dim:
                    end = pos + delta_d
                    if end > dim:
                        end = dim
                    for i in range(pos, end):
                        val = <double> (q[i] - data[v, i])
                        partial += val * val
                    pos = end
                    if partial * block_factors[bi] > thr:
                        pruned = 1
                        break
                    bi += 1
                dims += pos
                if pruned:
                    pruned_cnt += 1
                else:
                    dv = partial
                    full_cnt += 1

            elif family == FAMILY_PROJECTION:
                s_est = _sqdist(&proj_q[0], &proj_data[v, 0], dproj)
                dims += dproj
                if s_est > prune_mult * thr:
                    pruned = 1
                    pruned_cnt += 1
                else:
                    dv = _sqdist(&q[0], &data[v, 0], dim)
                    full_cnt += 1
                    dims += dim

            elif family == FAMILY_ADC:
                approx = 0.0
                for i in range(nseg):
                    approx += adc_table[i, codes[v, i]]
                dims += nseg
                if approx > prune_mult * thr:
                    pruned = 1
                    pruned_cnt += 1
                else:
                    dv = _sqdist(&q[0], &data[v, 0], dim)
                    full_cnt += 1
                    dims += dim

            else:  # FAMILY_FINGER
                if hop_state == 0:
                    if f_cnorm2[c] <= 0.0:
                        hop_state = 2
                    else:
                        tq = _dot64(&q[0], &data[c, 0], dim) / (<double> f_cnorm2[c])
                        hop_tqn = tq * sqrt(<double> f_cnorm2[c])
                        hop_qres2 = f_qnorm2 - hop_tqn * hop_tqn
                        if hop_qres2 < 0.0:
                            hop_qres2 = 0.0
                        hop_qres = sqrt(hop_qres2)
                        for w in range(nwords):
                            qbits[w] = 0
                        for i in range(l_bits):
                            val = f_pq[i] - tq * (<double> f_pc[c, i])
                            if val > 0.0:
                                qbits[i >> 6] |= (<unsigned long long> 1) << (i & 63)
                        dims += dim
                        hop_state = 1
                if hop_state == 2:
                    dv = _sqdist(&q[0], &data[v, 0], dim)
                    full_cnt += 1
                    dims += dim
                else:
                    h = 0
                    for w in range(nwords):
                        word = qbits[w] ^ f_bits[c, s_i, w]
                        h += POPCOUNTLL(word)
                    est = ((hop_tqn - f_td[c, s_i]) * (hop_tqn - f_td[c, s_i])
                           + hop_qres2 + (<double> f_dres[c, s_i]) * (<double> f_dres[c, s_i])
                           - 2.0 * hop_qres * (<double> f_dres[c, s_i]) * cos_table[h])
                    dims += l_bits
                    if est > prune_mult * thr:
                        pruned = 1
                        pruned_cnt += 1
                    else:
                        dv = _sqdist(&q[0], &data[v, 0], dim)
                        full_cnt += 1
                        dims += dim

            if pruned:
                if audit:
                    est = _sqdist(&q[0], &data[v, 0], dim)
                    if thr >= est:
                        fn_cnt += 1
                continue
            if rsize < ef or dv < thr:
                csize = _hpush(&cand_d[0], &cand_v[0], csize, dv, v)
                rsize = _hpush(&r_d[0], &r_v[0], rsize, -dv, v)
                if rsize > ef:
                    rsize = _hpop(&r_d[0], &r_v[0], rsize)

    cdef int nres = rsize if rsize < k else k
    ids = np.empty(nres, dtype=np.int64)
    dists = np.empty(nres, dtype=np.float64)
    cdef long[::1] ids_v = ids
    cdef double[::1] dists_v = dists
    # drop overflow beyond k, then read the k smallest in ascending order
    while rsize > nres:
        rsize = _hpop(&r_d[0], &r_v[0], rsize)
    for i in range(nres - 1, -1, -1):
        dists_v[i] = -r_d[0]
        ids_v[i] = r_v[0]
        rsize = _hpop(&r_d[0], &r_v[0], rsize)
    return ids, dists, comparisons, dims, full_cnt, pruned_cnt, fn_cnt, hops
