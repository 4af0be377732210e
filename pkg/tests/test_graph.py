import numpy as np
import pytest

from dcobench import synth
from dcobench.data import VectorSet, brute_force_knn
from dcobench.dco import ExactDco, TransformDco
from dcobench.graph import GraphIndex, beam_search, build_hnsw


def search_recalls(index, dco, queries, gt, k, ef, engine=None):
    recs = []
    for i in range(queries.count):
        res = beam_search(index, queries.vectors[i], k, ef, dco, engine=engine)
        recs.append(len(set(res.ids.tolist()) & set(gt.ids[i, :k].tolist())) / k)
    return float(np.mean(recs))


class TestBuild:
    def test_single_point(self):
        ds = VectorSet(np.array([[1.0, 2.0]], dtype=np.float32))
        idx = build_hnsw(ds, m=2, ef_construction=4, seed=0)
        assert idx.entry_point == 0
        assert idx.neighbors(0, 0).size == 0

    @pytest.mark.parametrize("engine", ["compiled", "pure"])
    def test_invariants(self, engine):
        ds = synth.gaussian_isotropic(400, 12, seed=31)
        idx = build_hnsw(ds, m=5, ef_construction=40, seed=32, engine=engine)
        idx.validate()

    def test_engines_agree(self):
        ds = synth.gaussian_correlated(600, 16, seed=33)
        a = build_hnsw(ds, m=6, ef_construction=50, seed=34, engine="compiled")
        b = build_hnsw(ds, m=6, ef_construction=50, seed=34, engine="pure")
        assert a.entry_point == b.entry_point and a.max_level == b.max_level
        assert np.array_equal(a.cnt0, b.cnt0) and np.array_equal(a.nbr0, b.nbr0)
        assert np.array_equal(a.upper_cnt, b.upper_cnt) and np.array_equal(a.upper, b.upper)

    def test_param_validation(self):
        ds = synth.uniform_cube(10, 2)
        with pytest.raises(ValueError):
            build_hnsw(ds, m=1, ef_construction=10)
        with pytest.raises(ValueError):
            build_hnsw(ds, m=4, ef_construction=2)
        with pytest.raises(ValueError):
            build_hnsw(VectorSet(np.empty((0, 2), dtype=np.float32)), m=2, ef_construction=4)

    def test_exact_recall_with_huge_ef(self):
        ds = synth.gaussian_isotropic(2000, 16, seed=35)
        idx = build_hnsw(ds, m=8, ef_construction=100, seed=36)
        qs = synth.gaussian_isotropic(50, 16, seed=37)
        gt = brute_force_knn(ds, qs, 10)
        assert search_recalls(idx, ExactDco(ds), qs, gt, 10, 2000) == 1.0


class TestBeamSearch:
    def test_oracle_equivalence_ef_equals_n(self, small_corr, small_index, small_queries):
        gt = brute_force_knn(small_corr, small_queries, 10)
        dco = ExactDco(small_corr)
        for i in range(10):
            res = beam_search(small_index, small_queries.vectors[i], 10, small_corr.count, dco)
            assert res.ids.tolist() == gt.ids[i, :10].tolist()
            assert np.all(np.diff(res.distances) >= 0)

    def test_result_size_capped_by_reachable(self):
        # two far clusters with no cross edges at tiny M can strand nodes, but
        # |result| = min(k, reachable) must hold regardless
        ds = synth.uniform_cube(20, 3, seed=40)
        idx = build_hnsw(ds, m=2, ef_construction=4, seed=41)
        dco = ExactDco(ds)
        res = beam_search(idx, ds.vectors[0], 20, 20, dco)
        assert 1 <= res.ids.size <= 20

    def test_recall_nondecreasing_in_ef(self, small_corr, small_index, small_queries):
        gt = brute_force_knn(small_corr, small_queries, 10)
        dco = ExactDco(small_corr)
        efs = [10, 20, 40, 80, 160, 320]
        recalls = [search_recalls(small_index, dco, small_queries, gt, 10, ef) for ef in efs]
        pairs = [(i, j) for i in range(len(efs)) for j in range(i + 1, len(efs))]
        ok = sum(recalls[j] >= recalls[i] - 1e-12 for i, j in pairs)
        assert ok >= 0.95 * len(pairs)

    def test_stats_identity_and_exact_dims(self, small_corr, small_index, small_queries):
        dco = ExactDco(small_corr)
        for engine in ("compiled", "pure"):
            res = beam_search(small_index, small_queries.vectors[0], 5, 50, dco, engine=engine)
            st = res.stats
            assert st.pruned_count + st.full_dist_count == st.comparisons
            assert st.dims_evaluated == small_corr.dim * st.full_dist_count
            assert st.pruned_count == 0
            assert st.hops > 0 and st.elapsed_s > 0

    def test_ef_less_than_k_rejected(self, small_corr, small_index):
        with pytest.raises(ValueError):
            beam_search(small_index, small_corr.vectors[0], 10, 5, ExactDco(small_corr))

    def test_wrong_dataset_rejected(self, small_corr, small_index):
        other = synth.gaussian_isotropic(small_corr.count, small_corr.dim, seed=999)
        with pytest.raises(ValueError, match="search dataset"):
            beam_search(small_index, small_corr.vectors[0], 5, 10, ExactDco(other))

    def test_query_dim_checked(self, small_corr, small_index):
        with pytest.raises(ValueError):
            beam_search(small_index, np.zeros(7, dtype=np.float32), 5, 10, ExactDco(small_corr))

    def test_lower_bound_dco_identical_results_and_audit_zero(self, small_corr, small_queries):
        # lower-bound pruning rejects only candidates the exact comparison
        # would reject, so on the same graph results match hop for hop
        from dcobench.dco import apply_transform

        for kind in ("pca", "dwt"):
            dco = TransformDco.fit(kind, small_corr)
            idx = build_hnsw(dco.search_dataset, m=8, ef_construction=100, seed=103)
            base = ExactDco(dco.search_dataset)
            for i in range(8):
                q = small_queries.vectors[i]
                q_t = apply_transform(dco.model, VectorSet(q[None, :])).vectors[0]
                r_dco = beam_search(idx, q, 10, 50, dco, audit=True)
                r_base = beam_search(idx, q_t, 10, 50, base)
                assert r_dco.ids.tolist() == r_base.ids.tolist()
                assert r_dco.stats.hops == r_base.stats.hops
                assert r_dco.stats.false_negatives == 0


class TestPersistence:
    def test_save_load_roundtrip(self, tmp_path, small_corr, small_index):
        path = tmp_path / "g.idx"
        small_index.save(path)
        back = GraphIndex.load(path, small_corr)
        assert back.entry_point == small_index.entry_point
        assert back.max_level == small_index.max_level
        assert np.array_equal(back.nbr0, small_index.nbr0)
        assert np.array_equal(back.cnt0, small_index.cnt0)
        assert np.array_equal(back.upper, small_index.upper)
        assert np.array_equal(back.levels, small_index.levels)
        assert back.adjacency_fingerprint() == small_index.adjacency_fingerprint()

    def test_load_rejects_wrong_dataset(self, tmp_path, small_corr, small_index):
        path = tmp_path / "g.idx"
        small_index.save(path)
        other = synth.gaussian_isotropic(small_corr.count, small_corr.dim, seed=1)
        with pytest.raises(ValueError, match="fingerprint"):
            GraphIndex.load(path, other)

    def test_load_rejects_garbage(self, tmp_path, small_corr):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"NOTANIDX" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            GraphIndex.load(path, small_corr)

    def test_with_dataset_swap(self, small_corr, small_index):
        dco = TransformDco.fit("pca", small_corr)
        swapped = small_index.with_dataset(dco.search_dataset)
        assert swapped.nbr0 is small_index.nbr0
        assert swapped.dataset is dco.search_dataset
        with pytest.raises(ValueError):
            small_index.with_dataset(synth.uniform_cube(10, 3))
