"""Dataset containers, binary vector IO, the exact-search oracle, and dataset statistics."""

from __future__ import annotations

import os
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VectorSet",
    "GroundTruth",
    "DatasetStats",
    "load_vectors",
    "save_vectors",
    "squared_distance",
    "brute_force_knn",
    "estimate_lid",
    "sample_training_set",
    "dataset_stats",
    "worker_count",
]

_FORMAT_DTYPES = {"fvecs": np.dtype("<f4"), "ivecs": np.dtype("<i4"), "bvecs": np.dtype("u1")}


def worker_count() -> int:
    """Worker cap for parallel sections, honoring the FUDIST_THREADS environment variable."""
    env = os.environ.get("FUDIST_THREADS")
    cpus = os.cpu_count() or 1
    if env is None:
        return cpus
    try:
        n = int(env)
    except ValueError:
        raise ValueError(f"FUDIST_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cpus, n))


@dataclass
class VectorSet:
    """A dense row-major matrix of float32 vectors with optional external ids."""

    vectors: np.ndarray  # (count, dim) float32, C-contiguous
    ids: np.ndarray | None = None  # external integer ids, defaults to 0..count-1

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {v.shape}")
        self.vectors = v
        if self.ids is not None:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (v.shape[0],):
                raise ValueError("ids length must equal vector count")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] if self.count else 0

    def external_ids(self) -> np.ndarray:
        if self.ids is not None:
            return self.ids
        return np.arange(self.count, dtype=np.int64)

    def fingerprint(self) -> int:
        """CRC32 of the raw vector bytes, used to tie indexes and fitted models to their data."""
        return zlib.crc32(np.ascontiguousarray(self.vectors).tobytes()) & 0xFFFFFFFF

    def row(self, i: int) -> np.ndarray:
        return self.vectors[i]


@dataclass
class GroundTruth:
    """Exact k-nearest-neighbor table: per query, ids and squared distances ascending."""

    ids: np.ndarray  # (nq, k) int32
    distances: np.ndarray  # (nq, k) float32, squared L2, non-decreasing per row

    def __post_init__(self) -> None:
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        self.distances = np.ascontiguousarray(self.distances, dtype=np.float32)
        if self.ids.shape != self.distances.shape:
            raise ValueError("ids and distances shapes differ")

    @property
    def query_count(self) -> int:
        return self.ids.shape[0]

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def save(self, prefix: str | os.PathLike) -> tuple[str, str]:
        """Persist as sibling files: <prefix>.ivecs (ids) and <prefix>.fvecs (squared distances)."""
        prefix = os.fspath(prefix)
        id_path, dist_path = prefix + ".ivecs", prefix + ".fvecs"
        _write_records(self.ids.astype("<i4"), id_path)
        save_vectors(VectorSet(self.distances), dist_path, "fvecs")
        return id_path, dist_path

    @classmethod
    def load(cls, prefix: str | os.PathLike) -> "GroundTruth":
        prefix = os.fspath(prefix)
        ids = _read_int_records(prefix + ".ivecs")
        dists = load_vectors(prefix + ".fvecs", "fvecs").vectors
        return cls(ids, dists)


@dataclass
class DatasetStats:
    """Size, dimensionality, and hardness statistics of a dataset."""

    count: int
    dim: int
    lid: float
    hardness: float = field(init=False)

    def __post_init__(self) -> None:
        if self.lid <= 0:
            raise ValueError("lid must be positive")
        self.hardness = self.dim / self.lid


def load_vectors(path: str | os.PathLike, format: str) -> VectorSet:
    """Read a .fvecs/.ivecs/.bvecs file (records of [int32 dim][dim components], little-endian).

    Integer components are widened to float32. Raises on truncated records, inconsistent
    dimensions, or non-finite values; an empty file yields an empty set with a warning.
    """
    if format not in _FORMAT_DTYPES:
        raise ValueError(f"unknown format {format!r}, expected one of {sorted(_FORMAT_DTYPES)}")
    raw = np.fromfile(os.fspath(path), dtype=np.uint8)
    if raw.size == 0:
        warnings.warn(f"{path}: empty file, loading an empty vector set")
        return VectorSet(np.empty((0, 0), dtype=np.float32))
    if raw.size < 4:
        raise ValueError(f"{path}: truncated header")
    dim = int(raw[:4].view("<i4")[0])
    if dim <= 0:
        raise ValueError(f"{path}: non-positive dimension {dim}")
    comp = _FORMAT_DTYPES[format]
    record_bytes = 4 + dim * comp.itemsize
    if raw.size % record_bytes != 0:
        raise ValueError(f"{path}: file size {raw.size} is not a multiple of record size {record_bytes}")
    records = raw.reshape(-1, record_bytes)
    dims = records[:, :4].copy().view("<i4").ravel()
    if not np.all(dims == dim):
        raise ValueError(f"{path}: inconsistent dimensions between records")
    body = records[:, 4:].copy().view(comp)
    values = np.ascontiguousarray(body, dtype=np.float32)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values in data")
    return VectorSet(values)


def _write_records(body: np.ndarray, path: str | os.PathLike) -> None:
    """Write a 2-D array of 4-byte components as dim-prefixed records."""
    count, dim = body.shape
    out = np.empty((count, 4 + dim * 4), dtype=np.uint8)
    if count:
        out[:, :4] = np.full((count, 1), dim, dtype="<i4").view(np.uint8)
        out[:, 4:] = body.view(np.uint8)
    out.tofile(os.fspath(path))


def _read_int_records(path: str | os.PathLike) -> np.ndarray:
    """Read an .ivecs file as int32 without widening to float."""
    raw = np.fromfile(os.fspath(path), dtype="<i4")
    if raw.size == 0:
        return np.empty((0, 0), dtype=np.int32)
    dim = int(raw[0])
    if dim <= 0 or raw.size % (dim + 1) != 0:
        raise ValueError(f"{path}: malformed ivecs file")
    records = raw.reshape(-1, dim + 1)
    if not np.all(records[:, 0] == dim):
        raise ValueError(f"{path}: inconsistent dimensions between records")
    return np.ascontiguousarray(records[:, 1:], dtype=np.int32)


def save_vectors(vset: VectorSet, path: str | os.PathLike, format: str) -> None:
    """Write a VectorSet as .fvecs or .ivecs; round-trips bit-exactly through load_vectors."""
    if format not in ("fvecs", "ivecs"):
        raise ValueError(f"save supports fvecs/ivecs, got {format!r}")
    vals = vset.vectors
    if format == "ivecs":
        rounded = np.rint(vals)
        if not np.array_equal(rounded, vals):
            raise ValueError("ivecs requires integral component values")
        body = rounded.astype("<i4")
    else:
        body = vals.astype("<f4")
    _write_records(body, path)


def squared_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance with float64 accumulation."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = (a - b).astype(np.float64)
    return float(np.dot(d, d))


def _query_block_knn(data64: np.ndarray, sq_norms: np.ndarray, queries: np.ndarray, k: int):
    """Exact top-k for a block of queries via the norms + Gram-matrix expansion."""
    q64 = queries.astype(np.float64)
    d2 = sq_norms[None, :] - 2.0 * (q64 @ data64.T) + np.einsum("ij,ij->i", q64, q64)[:, None]
    np.maximum(d2, 0.0, out=d2)
    n = data64.shape[0]
    if k < n:
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
    else:
        part = np.broadcast_to(np.arange(n), (queries.shape[0], n))
    rows = np.arange(queries.shape[0])[:, None]
    part_d = d2[rows, part]
    # ascending distance, ties broken by smaller id
    order = np.lexsort((part, part_d), axis=1)
    return part[rows, order], part_d[rows, order]


def brute_force_knn(dataset: VectorSet, queries: VectorSet, k: int, block: int = 256) -> GroundTruth:
    """Exact k-NN by squared distance, ties broken by smaller id. The oracle for everything else."""
    if k <= 0:
        raise ValueError("k must be positive")
    if k > dataset.count:
        raise ValueError(f"k={k} exceeds dataset count {dataset.count}")
    if queries.dim != dataset.dim:
        raise ValueError(f"dimension mismatch: queries {queries.dim} vs dataset {dataset.dim}")
    data64 = dataset.vectors.astype(np.float64)
    sq_norms = np.einsum("ij,ij->i", data64, data64)
    nq = queries.count
    ids = np.empty((nq, k), dtype=np.int32)
    dists = np.empty((nq, k), dtype=np.float32)
    blocks = [(s, min(s + block, nq)) for s in range(0, nq, block)]

    def run(span):
        s, e = span
        bi, bd = _query_block_knn(data64, sq_norms, queries.vectors[s:e], k)
        ids[s:e] = bi
        dists[s:e] = bd

    workers = worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for span in blocks:
            run(span)
    return GroundTruth(ids, dists)


def estimate_lid(dataset: VectorSet, sample_size: int | None = None, k: int = 100,
                 seed: int = 0) -> float:
    """Maximum-likelihood local intrinsic dimensionality, averaged over a random sample.

    Per sampled point x with neighbor distances r_1 <= ... <= r_k (self excluded):
    lid(x) = -1 / mean_i(ln(r_i / r_k)). Samples hitting a zero radius (duplicate
    points) are skipped with a warning.
    """
    n = dataset.count
    if k < 2:
        raise ValueError("k must be >= 2")
    if k >= n:
        raise ValueError(f"k={k} requires a dataset larger than k+1, got {n}")
    if sample_size is None:
        sample_size = min(1000, n)
    if sample_size > n or sample_size < 1:
        raise ValueError(f"sample_size={sample_size} out of range for count {n}")
    rng = np.random.default_rng(seed)
    sample = rng.choice(n, size=sample_size, replace=False)
    # k+1 nearest including the point itself, then drop the self column
    gt = brute_force_knn(dataset, VectorSet(dataset.vectors[sample]), k + 1)
    radii = np.sqrt(gt.distances.astype(np.float64))
    self_col = gt.ids == sample[:, None].astype(np.int32)
    # the self match is always at distance 0; mask exactly one column per row
    first_self = np.argmax(self_col, axis=1)
    keep = np.ones_like(radii, dtype=bool)
    keep[np.arange(sample_size), first_self] = False
    neigh = radii[keep].reshape(sample_size, k)
    ok = neigh[:, 0] > 0.0
    if not np.all(ok):
        warnings.warn(f"estimate_lid: skipped {int((~ok).sum())} sample(s) with duplicate neighbors")
        neigh = neigh[ok]
    if neigh.shape[0] == 0:
        raise ValueError("all sampled points had zero-distance neighbors; cannot estimate LID")
    log_ratio = np.log(neigh / neigh[:, -1:])
    lids = -1.0 / log_ratio.mean(axis=1)
    return float(lids.mean())


def dataset_stats(dataset: VectorSet, sample_size: int | None = None, k: int = 100,
                  seed: int = 0) -> DatasetStats:
    lid = estimate_lid(dataset, sample_size=sample_size, k=k, seed=seed)
    return DatasetStats(count=dataset.count, dim=dataset.dim, lid=lid)


def sample_training_set(dataset: VectorSet, n: int, seed: int = 0) -> VectorSet:
    """Sample n rows without replacement, deterministic per seed; n == count returns the full set."""
    if not 1 <= n <= dataset.count:
        raise ValueError(f"n={n} out of range 1..{dataset.count}")
    if n == dataset.count:
        return VectorSet(dataset.vectors.copy(), None if dataset.ids is None else dataset.ids.copy())
    rng = np.random.default_rng(seed)
    idx = rng.choice(dataset.count, size=n, replace=False)
    ids = dataset.external_ids()[idx]
    return VectorSet(dataset.vectors[idx].copy(), ids)
