"""Command-line driver: ingest, stats, gt, build, fit-dco, query, bench, report.

Configuration is flat key=value text with dotted section prefixes
(e.g. dco.opq.alpha=0.8); command-line --set overrides file values. All seeds
are explicit, never wall-clock. The FUDIST_THREADS environment variable caps
worker counts for the parallel sections.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .data import (
    GroundTruth,
    VectorSet,
    brute_force_knn,
    dataset_stats,
    load_vectors,
    save_vectors,
)
from .dco import (
    ExactDco,
    FingerDco,
    LshDco,
    OpqDco,
    TransformDco,
    load_external_projection,
    load_model,
    save_model,
)
from .graph import GraphIndex, beam_search, build_hnsw
from .metrics import (
    BenchPlan,
    recall,
    run_benchmark,
    write_ar_csv,
    write_records_csv,
)

__all__ = ["dispatch", "main"]

TRANSFORM_KINDS = ("pca", "dwt", "ads")
ALL_DCOS = ("exact", "pca", "dwt", "ads", "lsh", "external", "opq", "finger")


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class RunConfig:
    """Resolved benchmark configuration (file values plus --set overrides)."""

    values: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ValueError(f"missing required config key {key!r}")
        return self.values[key]

    def get_int(self, key: str, default: int) -> int:
        v = self.values.get(key)
        return default if v is None else int(v)

    def get_float(self, key: str, default: float) -> float:
        v = self.values.get(key)
        return default if v is None else float(v)

    def get_bool(self, key: str, default: bool) -> bool:
        v = self.values.get(key)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {v!r}")

    def comment(self) -> str:
        return " ".join(f"{k}={v}" for k, v in sorted(self.values.items()))


def _load_dataset(path: str, format: str = "fvecs") -> VectorSet:
    return load_vectors(path, format)


def _fit_dco_from_args(name: str, dataset: VectorSet, args, index: GraphIndex | None):
    seed = args.seed
    if name == "exact":
        return ExactDco(dataset)
    if name in TRANSFORM_KINDS:
        return TransformDco.fit(name, dataset, seed=seed, delta_d=args.delta_d,
                                epsilon0=args.epsilon0)
    if name == "lsh":
        return LshDco.fit(dataset, d=args.proj_dim, p_tau=args.p_tau, seed=seed)
    if name == "opq":
        return OpqDco.fit(dataset, m=args.segments, ks=args.ks, t1=args.t1, t2=args.t2,
                          seed=seed, alpha=args.alpha)
    if name == "finger":
        if index is None:
            raise ValueError("fitting the edge-geometry comparator requires --index")
        return FingerDco.fit(index, dataset, l_bits=args.l_bits, seed=seed, alpha=args.alpha)
    if name == "external":
        if not args.embeddings:
            raise ValueError("external comparator requires --embeddings")
        return load_external_projection(
            args.embeddings, args.alpha, dataset,
            query_matrix_path=args.query_matrix,
            query_bias_path=args.query_bias,
            query_embeddings_path=args.query_embeddings,
        )
    raise ValueError(f"unknown comparator {name!r}")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_ingest(args) -> int:
    vs = load_vectors(args.input, args.format)
    print(f"loaded {vs.count} vectors of dim {vs.dim} from {args.input}")
    if args.output:
        save_vectors(vs, args.output, args.output_format)
        print(f"wrote {args.output} ({args.output_format})")
    return 0


def _cmd_stats(args) -> int:
    vs = _load_dataset(args.data, args.format)
    sample = args.sample if args.sample > 0 else None
    st = dataset_stats(vs, sample_size=sample, k=args.k, seed=args.seed)
    print(f"count={st.count} dim={st.dim} lid={st.lid:.3f} hardness={st.hardness:.3f}")
    return 0


def _cmd_gt(args) -> int:
    data = _load_dataset(args.data, args.format)
    queries = _load_dataset(args.queries, args.format)
    gt = brute_force_knn(data, queries, args.k)
    id_path, dist_path = gt.save(args.output)
    print(f"wrote {id_path} and {dist_path} (top-{args.k} for {queries.count} queries)")
    return 0


def _cmd_build(args) -> int:
    data = _load_dataset(args.data, args.format)
    index = build_hnsw(data, m=args.m, ef_construction=args.ef_construction,
                       seed=args.seed, engine=args.engine)
    index.save(args.output)
    print(f"built index: N={index.count} M={index.m} max_level={index.max_level} "
          f"entry={index.entry_point} -> {args.output}")
    return 0


def _cmd_fit_dco(args) -> int:
    data = _load_dataset(args.data, args.format)
    index = GraphIndex.load(args.index, data) if args.index else None
    dco = _fit_dco_from_args(args.dco, data, args, index)
    save_model(dco, args.output)
    print(f"fitted {dco.name} ({dco.params}) -> {args.output}")
    return 0


def _cmd_query(args) -> int:
    data = _load_dataset(args.data, args.format)
    index = GraphIndex.load(args.index, data)
    queries = _load_dataset(args.queries, args.format)
    if not 0 <= args.query_index < queries.count:
        raise ValueError(f"query index {args.query_index} out of range")
    if args.model:
        dco = load_model(args.model, data, index=index)
    else:
        dco = ExactDco(data)
    search_index = index if dco.search_dataset is data else index.with_dataset(dco.search_dataset)
    res = beam_search(search_index, queries.vectors[args.query_index], args.k, args.ef,
                      dco, audit=args.audit, engine=args.engine, query_id=args.query_index)
    st = res.stats
    print(f"dco={dco.name} k={args.k} ef={args.ef} hops={st.hops} T={st.comparisons} "
          f"pruned={st.pruned_count} full={st.full_dist_count} "
          f"elapsed_us={st.elapsed_s * 1e6:.1f} preprocess_us={st.preprocess_s * 1e6:.1f}")
    for rank, (nid, dsq) in enumerate(zip(res.ids, res.distances)):
        print(f"{rank:4d} id={int(nid):8d} dist={math.sqrt(max(dsq, 0.0)):.6f}")
    if st.false_negatives is not None:
        print(f"false_negatives={st.false_negatives}")
    if args.gt:
        gt = GroundTruth.load(args.gt)
        r = recall(res.ids, gt.ids[args.query_index], args.k)
        print(f"recall={r:.4f}")
    return 0


def _build_plan(cfg: RunConfig, engine: str | None) -> tuple[BenchPlan, str, str | None]:
    fmt = cfg.get("format", "fvecs")
    data = _load_dataset(cfg.require("dataset"), fmt)
    queries = _load_dataset(cfg.require("queries"), fmt)
    gt = GroundTruth.load(cfg.require("gt"))
    index = GraphIndex.load(cfg.require("index"), data)
    names = [s.strip() for s in cfg.require("dcos").split(",") if s.strip()]
    dcos = []
    for name in names:
        if name == "exact":
            dcos.append(ExactDco(data))
            continue
        model_path = cfg.get(f"dco.{name}.model")
        if model_path is None:
            raise ValueError(f"missing config key dco.{name}.model")
        dcos.append(load_model(model_path, data, index=index))
    ef_values = [int(s) for s in cfg.require("ef").split(",") if s.strip()]
    plan = BenchPlan(
        dataset_name=cfg.get("dataset.name", Path(cfg.require("dataset")).stem),
        index=index,
        queries=queries,
        gt=gt,
        dcos=dcos,
        ef_values=ef_values,
        k=cfg.get_int("k", 20),
        repetitions=cfg.get_int("repetitions", 3),
        audit=cfg.get_bool("audit", False),
        engine=engine or cfg.get("engine"),
        ar_pairs=cfg.get_int("ar_pairs", 0),
        seed=cfg.get_int("seed", 0),
    )
    output = cfg.get("output", "results.csv")
    ar_output = cfg.get("ar_output")
    if plan.ar_pairs > 0 and ar_output is None:
        ar_output = str(Path(output).with_suffix("")) + "_ar.csv"
    return plan, output, ar_output


def _cmd_bench(args) -> int:
    values: dict[str, str] = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        values[key.strip()] = val.strip()
    cfg = RunConfig(values)
    plan, output, ar_output = _build_plan(cfg, args.engine)
    if args.verbose:
        plan.progress = lambda msg: print(msg, file=sys.stderr)
    records, summaries = run_benchmark(plan)
    write_records_csv(records, output, config_comment=cfg.comment())
    print(f"wrote {len(records)} rows -> {output}")
    if ar_output and summaries:
        write_ar_csv(summaries, ar_output, plan.dataset_name, config_comment=cfg.comment())
        print(f"wrote {len(summaries)} approximation-ratio rows -> {ar_output}")
    return 0


def _cmd_report(args) -> int:
    rows = []
    with open(args.csv, encoding="utf-8") as f:
        header = None
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(dict(zip(header, line.split(","))))
    if not rows:
        raise ValueError(f"{args.csv}: no data rows")
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["dataset"], row["dco"]), []).append(row)
    print(f"{'dataset':<16} {'dco':<9} {'ef':>6} {'recall':>8} {'qps':>12} "
          f"{'p_d':>8} {'p_v':>8} {'fn':>9} {'T':>9}")
    for (ds, dco), group in sorted(groups.items()):
        for row in sorted(group, key=lambda r: int(r["ef"])):
            fn = row.get("fn_ratio", "") or "-"
            print(f"{ds:<16} {dco:<9} {int(row['ef']):>6} {float(row['recall']):>8.4f} "
                  f"{float(row['qps']):>12.1f} {float(row['p_d']):>8.4f} "
                  f"{float(row['p_v']):>8.4f} {fn:>9} {float(row['T']):>9.1f}")
    return 0


# ---------------------------------------------------------------------------

def _add_common_data_args(p, queries: bool = False) -> None:
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", default="fvecs", choices=["fvecs", "ivecs", "bvecs"])
    if queries:
        p.add_argument("--queries", required=True, help="query file (same format)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcobench",
        description="Nearest-neighbor search with pluggable distance comparison "
                    "operators and a benchmark harness for them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate/convert a vector file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="fvecs", choices=["fvecs", "ivecs", "bvecs"])
    p.add_argument("--output")
    p.add_argument("--output-format", default="fvecs", choices=["fvecs", "ivecs"])
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="print dataset statistics (LID, hardness)")
    _add_common_data_args(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("gt", help="exact ground truth via brute force")
    _add_common_data_args(p, queries=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--output", required=True, help="output prefix (.ivecs/.fvecs pair)")
    p.set_defaults(func=_cmd_gt)

    p = sub.add_parser("build", help="build and persist the graph index")
    _add_common_data_args(p)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=["compiled", "pure"])
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("fit-dco", help="fit and persist a comparator model")
    _add_common_data_args(p)
    p.add_argument("--dco", required=True, choices=[d for d in ALL_DCOS])
    p.add_argument("--output", required=True)
    p.add_argument("--index", help="index file (required for finger)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-d", type=int, default=32)
    p.add_argument("--epsilon0", type=float, default=2.1)
    p.add_argument("--proj-dim", type=int, default=64, help="projection width d (lsh)")
    p.add_argument("--p-tau", type=float, default=0.95)
    p.add_argument("--segments", type=int, default=8, help="segment count m (opq)")
    p.add_argument("--ks", type=int, default=256)
    p.add_argument("--t1", type=int, default=20)
    p.add_argument("--t2", type=int, default=20)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--l-bits", type=int, default=64)
    p.add_argument("--embeddings", help="fvecs embeddings for the external comparator")
    p.add_argument("--query-matrix", help="fvecs d x D query-side matrix (external)")
    p.add_argument("--query-bias", help="fvecs 1 x d query-side bias (external)")
    p.add_argument("--query-embeddings", help="fvecs precomputed query embeddings (external)")
    p.set_defaults(func=_cmd_fit_dco)

    p = sub.add_parser("query", help="run one search verbosely")
    _add_common_data_args(p, queries=True)
    p.add_argument("--index", required=True)
    p.add_argument("--model", help="comparator model file (default: exact baseline)")
    p.add_argument("--query-index", type=int, default=0)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--ef", type=int, default=100)
    p.add_argument("--audit", action="store_true")
    p.add_argument("--gt", help="ground-truth prefix for recall")
    p.add_argument("--engine", choices=["compiled", "pure"])
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("bench", help="run the benchmark sweep from a config file")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--engine", choices=["compiled", "pure"])
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="print aggregate tables from a results CSV")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
