"""Cross-engine equivalence: the compiled kernels and the pure-Python engine
must produce the same graphs, the same search results, and the same counters."""

import numpy as np
import pytest

from dcobench import beam_search, build_hnsw, synth
from dcobench._kernels import HAVE_COMPILED, resolve_engine
from dcobench.dco import ExactDco, FingerDco, LshDco, OpqDco, TransformDco

pytestmark = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled extension not built")


@pytest.fixture(scope="module")
def env():
    ds = synth.gaussian_correlated(1800, 40, seed=71)
    qs = synth.gaussian_correlated(15, 40, seed=72)
    idx = build_hnsw(ds, m=7, ef_construction=90, seed=73)
    return ds, qs, idx


def make_dcos(ds, idx):
    return [
        ExactDco(ds),
        TransformDco.fit("pca", ds),
        TransformDco.fit("dwt", ds),
        TransformDco.fit("ads", ds, seed=3),
        LshDco.fit(ds, d=16, p_tau=0.9, seed=4),
        OpqDco.fit(ds, m=4, ks=32, t1=4, t2=4, seed=5, alpha=0.9),
        FingerDco.fit(idx, ds, l_bits=64, seed=6, alpha=1.2),
    ]


def test_resolve_engine():
    assert resolve_engine(None) in ("compiled", "pure")
    assert resolve_engine("pure") == "pure"
    with pytest.raises(ValueError):
        resolve_engine("quantum")


def test_build_identical(env):
    ds, _, _ = env
    a = build_hnsw(ds, m=5, ef_construction=60, seed=74, engine="compiled")
    b = build_hnsw(ds, m=5, ef_construction=60, seed=74, engine="pure")
    assert a.entry_point == b.entry_point
    assert a.max_level == b.max_level
    assert np.array_equal(a.levels, b.levels)
    assert np.array_equal(a.cnt0, b.cnt0)
    assert np.array_equal(a.nbr0, b.nbr0)
    assert np.array_equal(a.upper_cnt, b.upper_cnt)
    assert np.array_equal(a.upper, b.upper)


@pytest.mark.parametrize("audit", [False, True])
def test_search_identical_all_families(env, audit):
    ds, qs, idx = env
    for dco in make_dcos(ds, idx):
        index = idx if dco.search_dataset is ds else idx.with_dataset(dco.search_dataset)
        for qi in range(qs.count):
            rc = beam_search(index, qs.vectors[qi], 10, 40, dco,
                             engine="compiled", audit=audit, query_id=qi)
            rp = beam_search(index, qs.vectors[qi], 10, 40, dco,
                             engine="pure", audit=audit, query_id=qi)
            assert rc.ids.tolist() == rp.ids.tolist(), dco.name
            # engines accumulate float32 terms in different orders
            assert np.allclose(rc.distances, rp.distances, rtol=1e-6), dco.name
            for field in ("comparisons", "dims_evaluated", "full_dist_count",
                          "pruned_count", "hops", "false_negatives"):
                assert getattr(rc.stats, field) == getattr(rp.stats, field), \
                    f"{dco.name}: {field}"


def test_env_override(env, monkeypatch):
    ds, qs, idx = env
    monkeypatch.setenv("DCOBENCH_ENGINE", "pure")
    assert resolve_engine(None) == "pure"
    res = beam_search(idx, qs.vectors[0], 5, 20, ExactDco(ds))
    assert res.ids.size == 5
