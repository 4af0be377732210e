"""Benchmark measurements: recall, pruning ratios, approximation-ratio statistics,
false-negative accounting, benefit thresholds, and the sweep driver."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .data import GroundTruth, VectorSet, squared_distance
from .dco.base import Dco, SearchStats
from .dco.geometry import FingerDco
from .graph import GraphIndex, beam_search

__all__ = [
    "recall",
    "pruning_ratios",
    "ArSummary",
    "approximation_ratio_stats",
    "false_negative_ratio",
    "BenefitParams",
    "BenefitCheck",
    "benefit_check",
    "measure_costs",
    "BenchRecord",
    "BenchPlan",
    "run_benchmark",
    "write_records_csv",
    "write_ar_csv",
    "CSV_HEADER",
    "AR_CSV_HEADER",
]

CSV_HEADER = "dataset,dco,params,ef,k,recall,mean_us,qps,p_d,p_v,fn_ratio,hops,T,preprocess_us"
AR_CSV_HEADER = "dataset,dco,params,n,mean,var,min,q05,q25,q50,q75,q95,max"


def recall(result_ids: Sequence[int], gt_ids: Sequence[int], k: int) -> float:
    """recall k@k: fraction of the true top-k present in the returned top-k."""
    if len(result_ids) < k or len(gt_ids) < k:
        raise ValueError(f"need at least k={k} entries on both sides")
    hits = len(set(int(i) for i in result_ids[:k]) & set(int(i) for i in gt_ids[:k]))
    return hits / k


def pruning_ratios(stats: SearchStats, dim: int) -> tuple[float, float]:
    """(dimension-level, vector-level) pruning ratios from one or more merged searches."""
    t = stats.comparisons
    if t <= 0:
        raise ValueError("no comparisons recorded")
    p_d = 1.0 - stats.dims_evaluated / (dim * t)
    p_v = 1.0 - stats.full_dist_count / t
    return p_d, p_v


def merge_stats(all_stats: Iterable[SearchStats]) -> SearchStats:
    out = SearchStats()
    n = 0
    for s in all_stats:
        out.comparisons += s.comparisons
        out.dims_evaluated += s.dims_evaluated
        out.full_dist_count += s.full_dist_count
        out.pruned_count += s.pruned_count
        out.hops += s.hops
        out.elapsed_s += s.elapsed_s
        out.preprocess_s += s.preprocess_s
        if s.false_negatives is not None:
            out.false_negatives = (out.false_negatives or 0) + s.false_negatives
        n += 1
    return out


def false_negative_ratio(all_stats: Iterable[SearchStats]) -> float:
    """Wrongly-pruned-candidate events per comparison, aggregated over audit-mode searches."""
    total_fn = 0
    total_t = 0
    for s in all_stats:
        if s.false_negatives is None:
            raise ValueError("false-negative ratio needs audit-mode search stats")
        total_fn += s.false_negatives
        total_t += s.comparisons
    if total_t == 0:
        raise ValueError("no comparisons recorded")
    return total_fn / total_t


@dataclass
class ArSummary:
    """Distribution summary of estimated/true distance ratios (plain-distance units)."""

    dco: str
    params: str
    count: int
    mean: float
    var: float
    minimum: float
    q05: float
    q25: float
    q50: float
    q75: float
    q95: float
    maximum: float

    @classmethod
    def from_values(cls, dco: str, params: str, values: np.ndarray) -> "ArSummary":
        q = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
        return cls(dco=dco, params=params, count=values.size,
                   mean=float(values.mean()), var=float(values.var()),
                   minimum=float(values.min()), q05=float(q[0]), q25=float(q[1]),
                   q50=float(q[2]), q75=float(q[3]), q95=float(q[4]),
                   maximum=float(values.max()))


def approximation_ratio_values(dco: Dco, queries: VectorSet, n_pairs: int = 1000,
                               seed: int = 0, fraction: float | None = None) -> np.ndarray:
    """Sampled estimated/true distance ratios for one comparator.

    Pairs are (dataset vector, query); edge-geometry comparators sample graph
    edges instead since their estimator is defined per edge. Zero-distance
    pairs are skipped.
    """
    rng = np.random.default_rng(seed)
    data = dco.search_dataset.vectors
    n = data.shape[0]
    nq = queries.count
    ctx_cache: dict[int, object] = {}
    values = []
    is_edge_based = isinstance(dco, FingerDco)
    if is_edge_based:
        sources = np.nonzero(dco.index.cnt0 > 0)[0]
    attempts = 0
    while len(values) < n_pairs and attempts < 10 * n_pairs:
        attempts += 1
        qi = int(rng.integers(nq))
        ctx = ctx_cache.get(qi)
        if ctx is None:
            ctx = dco.preprocess_query(queries.vectors[qi], query_id=qi)
            ctx_cache[qi] = ctx
        if is_edge_based:
            c = int(sources[rng.integers(sources.size)])
            slot = int(rng.integers(int(dco.index.cnt0[c])))
            v = int(dco.index.nbr0[c, slot])
            est = dco.estimate_sq(ctx, v, from_node=c)
        else:
            v = int(rng.integers(n))
            est = dco.estimate_sq(ctx, v, fraction=fraction)
        true = squared_distance(ctx.query, data[v])
        if true <= 0.0:
            continue
        values.append(np.sqrt(max(est, 0.0)) / np.sqrt(true))
    return np.asarray(values)


def approximation_ratio_stats(dco: Dco, queries: VectorSet, n_pairs: int = 1000,
                              seed: int = 0, fraction: float | None = None) -> ArSummary:
    values = approximation_ratio_values(dco, queries, n_pairs, seed, fraction)
    return ArSummary.from_values(dco.name, dco.params, values)


@dataclass
class BenefitParams:
    """Measured cost ingredients of the benefit inequality."""

    comparisons: int  # T
    dim: int  # D of the comparator's search space
    f_d: float  # seconds per dimension evaluated (incl. pruning-test overhead)
    f_v: float  # seconds per vector approximation
    preprocess_s: float  # C
    full_dist_s: float  # seconds for one full distance at this D


class BenefitCheck(NamedTuple):
    beneficial: bool
    required_ratio: float
    observed_ratio: float


def benefit_check(params: BenefitParams, p_d: float | None, p_v: float | None,
                  family: str) -> BenefitCheck:
    """Evaluate the family's benefit inequality; returns the minimal pruning ratio required.

    Transformation comparators repay their cost when
        T * D * f_d * (1 - p_d) + C < T * full_dist_s,
    all others when
        T * f_v + T * (1 - p_v) * full_dist_s + C < T * full_dist_s.
    """
    if params.comparisons <= 0:
        raise ValueError("T must be positive")
    if params.full_dist_s <= 0:
        raise ValueError("full-distance cost must be positive")
    if family == "transformation":
        if params.f_d <= 0:
            raise ValueError("f_d must be positive")
        if p_d is None:
            raise ValueError("p_d required for transformation comparators")
        required = (1.0 - params.full_dist_s / (params.dim * params.f_d)
                    + params.preprocess_s / (params.comparisons * params.dim * params.f_d))
        return BenefitCheck(p_d > required, required, p_d)
    if p_v is None:
        raise ValueError("p_v required for vector-level comparators")
    required = (params.f_v / params.full_dist_s
                + params.preprocess_s / (params.comparisons * params.full_dist_s))
    return BenefitCheck(p_v > required, required, p_v)


def measure_costs(dim: int, delta_d: int = 32, batch: int = 2048, repeats: int = 5,
                  seed: int = 0) -> dict[str, float]:
    """Micro-measure full-distance and per-dimension costs on this machine.

    Returns seconds per full distance (full_dist_s) and per dimension evaluated
    with blocked pruning checks (f_d), both from bulk vectorized runs.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, dim)).astype(np.float32)
    q = rng.standard_normal(dim).astype(np.float32)
    best_full = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        d = x - q
        np.einsum("ij,ij->i", d, d)
        best_full = min(best_full, (time.perf_counter() - t0) / batch)
    best_blocked = float("inf")
    nblocks = (dim + delta_d - 1) // delta_d
    for _ in range(repeats):
        t0 = time.perf_counter()
        acc = np.zeros(batch)
        for b in range(nblocks):
            lo, hi = b * delta_d, min((b + 1) * delta_d, dim)
            d = x[:, lo:hi] - q[lo:hi]
            acc += np.einsum("ij,ij->i", d, d)
            acc > 1.0  # stand-in for the pruning test
        best_blocked = min(best_blocked, (time.perf_counter() - t0) / (batch * dim))
    return {"full_dist_s": best_full, "f_d": best_blocked}


@dataclass
class BenchRecord:
    """One harness output row."""

    dataset: str
    dco: str
    params: str
    ef: int
    k: int
    recall: float
    mean_us: float
    qps: float
    p_d: float
    p_v: float
    fn_ratio: float | None
    hops: float
    comparisons: float
    preprocess_us: float

    def csv_row(self) -> str:
        fn = "" if self.fn_ratio is None else f"{self.fn_ratio:.6g}"
        return (
            f"{self.dataset},{self.dco},{self.params},{self.ef},{self.k},"
            f"{self.recall:.6f},{self.mean_us:.3f},{self.qps:.3f},"
            f"{self.p_d:.6f},{self.p_v:.6f},{fn},{self.hops:.2f},"
            f"{self.comparisons:.1f},{self.preprocess_us:.3f}"
        )


@dataclass
class BenchPlan:
    """Resolved inputs for one benchmark sweep."""

    dataset_name: str
    index: GraphIndex
    queries: VectorSet
    gt: GroundTruth
    dcos: list[Dco]
    ef_values: list[int]
    k: int = 20
    repetitions: int = 3
    audit: bool = False
    engine: str | None = None
    ar_pairs: int = 0
    seed: int = 0
    progress: object = None  # optional callable(str)


def _bench_one(plan: BenchPlan, index: GraphIndex, dco: Dco, ef: int) -> BenchRecord:
    nq = plan.queries.count
    qv = plan.queries.vectors
    latencies = []
    rep_stats: list[SearchStats] = []
    rep_results: list[np.ndarray] = []
    for rep in range(plan.repetitions):
        t0 = time.perf_counter()
        stats_this = []
        results_this = []
        for i in range(nq):
            res = beam_search(index, qv[i], plan.k, ef, dco, engine=plan.engine, query_id=i)
            stats_this.append(res.stats)
            results_this.append(res.ids)
        latencies.append((time.perf_counter() - t0) / nq)
        if rep == 0:
            rep_stats = stats_this
            rep_results = results_this
    mean_recall = float(np.mean([
        recall(rep_results[i], plan.gt.ids[i], plan.k) for i in range(nq)
    ]))
    agg = merge_stats(rep_stats)
    p_d, p_v = pruning_ratios(agg, dco.search_dataset.dim)
    fn_ratio = None
    if plan.audit:
        audit_stats = []
        for i in range(nq):
            res = beam_search(index, qv[i], plan.k, ef, dco, audit=True,
                              engine=plan.engine, query_id=i)
            audit_stats.append(res.stats)
        fn_ratio = false_negative_ratio(audit_stats)
    mean_us = float(np.mean(latencies)) * 1e6
    return BenchRecord(
        dataset=plan.dataset_name,
        dco=dco.name,
        params=dco.params,
        ef=ef,
        k=plan.k,
        recall=mean_recall,
        mean_us=mean_us,
        qps=1e6 / mean_us if mean_us > 0 else float("inf"),
        p_d=p_d,
        p_v=p_v,
        fn_ratio=fn_ratio,
        hops=agg.hops / nq,
        comparisons=agg.comparisons / nq,
        preprocess_us=agg.preprocess_s / nq * 1e6,
    )


def run_benchmark(plan: BenchPlan) -> tuple[list[BenchRecord], list[ArSummary]]:
    """Timed single-worker sweep over (comparator, ef); optional audit and AR passes."""
    if plan.gt.k < plan.k:
        raise ValueError(f"ground truth holds top-{plan.gt.k}, need k={plan.k}")
    if plan.gt.query_count != plan.queries.count:
        raise ValueError("ground truth and query set sizes differ")
    records = []
    summaries = []
    for dco in plan.dcos:
        index = plan.index
        if dco.search_dataset is not index.dataset:
            index = index.with_dataset(dco.search_dataset)
        for ef in plan.ef_values:
            if plan.progress is not None:
                plan.progress(f"bench {dco.name} ef={ef}")
            records.append(_bench_one(plan, index, dco, ef))
        if plan.ar_pairs > 0:
            summaries.append(approximation_ratio_stats(dco, plan.queries,
                                                       n_pairs=plan.ar_pairs, seed=plan.seed))
    return records, summaries


def write_records_csv(records: Sequence[BenchRecord], path, config_comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as f:
        if config_comment:
            f.write(f"# {config_comment}\n")
        f.write(CSV_HEADER + "\n")
        for r in records:
            f.write(r.csv_row() + "\n")


def write_ar_csv(summaries: Sequence[ArSummary], path, dataset_name: str,
                 config_comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as f:
        if config_comment:
            f.write(f"# {config_comment}\n")
        f.write(AR_CSV_HEADER + "\n")
        for s in summaries:
            f.write(
                f"{dataset_name},{s.dco},{s.params},{s.count},{s.mean:.6g},{s.var:.6g},"
                f"{s.minimum:.6g},{s.q05:.6g},{s.q25:.6g},{s.q50:.6g},{s.q75:.6g},"
                f"{s.q95:.6g},{s.maximum:.6g}\n"
            )
