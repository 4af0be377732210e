#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python engine.

Builds one index per engine on the same synthetic data, then sweeps every
comparator family on both, checking that recalls agree and reporting the
speedup. Run: python benchmarks/engine_compare.py [--count N] [--dim D]
"""

import argparse
import time

import numpy as np

from dcobench import beam_search, build_hnsw, synth
from dcobench._kernels import HAVE_COMPILED
from dcobench.data import brute_force_knn
from dcobench.dco import ExactDco, FingerDco, LshDco, OpqDco, TransformDco
from dcobench.metrics import recall


def run_engine(index, dco, queries, gt, k, ef, engine):
    t0 = time.perf_counter()
    recalls = []
    for qi in range(queries.count):
        res = beam_search(index, queries.vectors[qi], k, ef, dco,
                          engine=engine, query_id=qi)
        recalls.append(recall(res.ids, gt.ids[qi], k))
    elapsed = time.perf_counter() - t0
    return float(np.mean(recalls)), queries.count / elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=10000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--ef", type=int, default=64)
    ap.add_argument("--m", type=int, default=12)
    ap.add_argument("--ef-construction", type=int, default=150)
    args = ap.parse_args()

    if not HAVE_COMPILED:
        raise SystemExit("compiled extension not built; nothing to compare")

    ds = synth.gaussian_correlated(args.count, args.dim, seed=1)
    qs = synth.gaussian_correlated(args.queries, args.dim, seed=2)
    gt = brute_force_knn(ds, qs, args.k)

    print(f"dataset {args.count}x{args.dim}, M={args.m}, "
          f"ef_construction={args.ef_construction}")
    t0 = time.perf_counter()
    index = build_hnsw(ds, args.m, args.ef_construction, seed=3, engine="compiled")
    t_compiled = time.perf_counter() - t0
    t0 = time.perf_counter()
    index_pure = build_hnsw(ds, args.m, args.ef_construction, seed=3, engine="pure")
    t_pure = time.perf_counter() - t0
    same = (np.array_equal(index.nbr0, index_pure.nbr0)
            and np.array_equal(index.cnt0, index_pure.cnt0))
    print(f"build: compiled {t_compiled:.2f}s, pure {t_pure:.2f}s "
          f"({t_pure / t_compiled:.0f}x), adjacency identical: {same}\n")

    dcos = [
        ExactDco(ds),
        TransformDco.fit("pca", ds),
        TransformDco.fit("dwt", ds),
        TransformDco.fit("ads", ds, seed=4),
        LshDco.fit(ds, d=32, p_tau=0.9, seed=5),
        OpqDco.fit(ds, m=8, ks=64, t1=5, t2=5, seed=6, alpha=0.9),
        FingerDco.fit(index, ds, l_bits=64, seed=7, alpha=1.2),
    ]
    print(f"{'dco':<8} {'recall(c)':>10} {'recall(p)':>10} {'qps(c)':>10} "
          f"{'qps(p)':>10} {'speedup':>8}")
    for dco in dcos:
        idx = index if dco.search_dataset is ds else index.with_dataset(dco.search_dataset)
        rc, qc = run_engine(idx, dco, qs, gt, args.k, args.ef, "compiled")
        rp, qp = run_engine(idx, dco, qs, gt, args.k, args.ef, "pure")
        flag = "" if abs(rc - rp) < 1e-9 else "  RECALL MISMATCH"
        print(f"{dco.name:<8} {rc:>10.4f} {rp:>10.4f} {qc:>10.0f} {qp:>10.0f} "
              f"{qc / qp:>7.1f}x{flag}")


if __name__ == "__main__":
    main()
