import numpy as np
import pytest

from dcobench import build_hnsw, synth
from dcobench.data import VectorSet


@pytest.fixture(scope="session")
def small_corr():
    """Correlated Gaussian set shared by graph/dco tests (2000 x 48)."""
    return synth.gaussian_correlated(2000, 48, condition_number=100, seed=101)


@pytest.fixture(scope="session")
def small_queries():
    return synth.gaussian_correlated(40, 48, condition_number=100, seed=102)


@pytest.fixture(scope="session")
def small_index(small_corr):
    return build_hnsw(small_corr, m=8, ef_construction=100, seed=103)


def naive_knn(dataset: VectorSet, q: np.ndarray, k: int):
    """Independent oracle: per-pair float64 scan with (distance, id) sort."""
    q64 = q.astype(np.float64)
    rows = []
    for i in range(dataset.count):
        d = dataset.vectors[i].astype(np.float64) - q64
        rows.append((float(np.dot(d, d)), i))
    rows.sort()
    return rows[:k]
