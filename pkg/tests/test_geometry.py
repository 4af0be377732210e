import numpy as np
import pytest

from dcobench import beam_search, build_hnsw, synth
from dcobench.data import VectorSet, squared_distance
from dcobench.dco import FingerDco, TransformDco, fit_finger
from dcobench.dco.geometry import _pack_signs


@pytest.fixture(scope="module")
def geo_setup():
    ds = synth.gaussian_correlated(1200, 32, seed=51)
    idx = build_hnsw(ds, m=6, ef_construction=60, seed=52)
    dco = FingerDco.fit(idx, ds, l_bits=64, seed=53, alpha=1.5)
    return ds, idx, dco


class TestFit:
    def test_per_edge_pythagorean_identity(self, geo_setup):
        ds, idx, dco = geo_setup
        m = dco.model
        x64 = ds.vectors.astype(np.float64)
        vnorm2 = np.einsum("ij,ij->i", x64, x64)
        checked = 0
        for c in range(0, ds.count, 17):
            for s in range(int(idx.cnt0[c])):
                v = int(idx.nbr0[c, s])
                lhs = float(m.td[c, s]) ** 2 + float(m.dres[c, s]) ** 2
                assert lhs == pytest.approx(vnorm2[v], rel=1e-3)
                checked += 1
        assert checked > 100

    def test_collinear_neighbor_has_zero_residual(self):
        # v = 2c: residual vanishes, sign bits canonicalize to zeros
        base = np.zeros((4, 8), dtype=np.float32)
        base[0, 0] = 1.0
        base[1, 0] = 2.0
        base[2, 1] = 1.0
        base[3, :] = 0.5
        ds = VectorSet(base)
        idx = build_hnsw(ds, m=2, ef_construction=4, seed=1)
        model = fit_finger(idx, ds, l_bits=64, seed=2)
        slots = idx.nbr0[0, : idx.cnt0[0]].tolist()
        if 1 in slots:
            s = slots.index(1)
            assert model.dres[0, s] == pytest.approx(0.0, abs=1e-6)
            assert all(int(w) == 0 for w in model.bits[0, s])

    def test_zero_norm_node_marked_degenerate(self):
        base = np.zeros((5, 6), dtype=np.float32)
        base[1:, :] = np.random.default_rng(3).standard_normal((4, 6)).astype(np.float32)
        ds = VectorSet(base)
        idx = build_hnsw(ds, m=2, ef_construction=4, seed=4)
        dco = FingerDco.fit(idx, ds, l_bits=32, seed=5)
        assert dco.model.cnorm2[0] == 0.0
        ctx = dco.preprocess_query(ds.vectors[2])
        if idx.cnt0[0] > 0:
            v = int(idx.nbr0[0, 0])
            out = dco.compare(ctx, 0, v, 1e-12)
            assert not out.pruned  # degenerate hop source never prunes

    def test_memory_accounting(self, geo_setup):
        # per edge: 2 floats + L bits; per node: (1 + L) floats
        ds, idx, dco = geo_setup
        m = dco.model
        n, cap = idx.nbr0.shape
        per_edge_bytes = m.td.nbytes + m.dres.nbytes + m.bits.nbytes
        assert per_edge_bytes == n * cap * (2 * 4 + m.l_bits // 8)
        per_node_bytes = m.cnorm2.nbytes + m.pc.nbytes
        assert per_node_bytes == n * (1 + m.l_bits) * 4

    def test_model_tied_to_graph(self, geo_setup):
        ds, idx, dco = geo_setup
        other = build_hnsw(ds, m=6, ef_construction=60, seed=999)
        with pytest.raises(ValueError, match="different graph"):
            FingerDco(dco.model, ds, other)

    def test_pack_signs_bit_layout(self):
        vals = np.zeros((1, 70))
        vals[0, 0] = 1.0
        vals[0, 63] = 2.0
        vals[0, 64] = -1.0
        vals[0, 69] = 3.0
        words = _pack_signs(vals, 70)
        assert words.shape == (1, 2)
        assert int(words[0, 0]) == (1 | (1 << 63))
        assert int(words[0, 1]) == (1 << 5)


class TestEstimate:
    def test_exact_inner_product_identity(self, geo_setup):
        ds, idx, dco = geo_setup
        qs = synth.gaussian_correlated(5, 32, seed=54)
        checked = 0
        for qi in range(qs.count):
            ctx = dco.preprocess_query(qs.vectors[qi])
            for c in range(0, ds.count, 59):
                for v in idx.nbr0[c, : idx.cnt0[c]]:
                    est = dco.estimate_sq_exact_ip(ctx, int(v), c)
                    true = squared_distance(ctx.query, ds.vectors[v])
                    assert est == pytest.approx(true, rel=1e-3, abs=1e-5)
                    checked += 1
        assert checked > 200

    def test_query_collinear_with_source_is_exact(self, geo_setup):
        # q = 3c: the query residual vanishes and the cross term drops out
        ds, idx, dco = geo_setup
        c = int(np.argmax(idx.cnt0))
        q = (3.0 * ds.vectors[c]).astype(np.float32)
        ctx = dco.preprocess_query(q)
        for v in idx.nbr0[c, : idx.cnt0[c]]:
            est = dco.estimate_sq(ctx, int(v), from_node=c)
            true = squared_distance(q, ds.vectors[v])
            assert est == pytest.approx(true, rel=1e-3, abs=1e-4)

    def test_parallel_residuals_give_exact_distance(self):
        # d_res parallel to q_res: hamming distance 0, cosine term exact
        base = np.zeros((3, 8), dtype=np.float32)
        base[0, 0] = 2.0  # c on axis 0
        base[1, 0] = 1.0
        base[1, 1] = 1.0  # v = c-component + residual along axis 1
        base[2, 5] = 4.0
        ds = VectorSet(base)
        idx = build_hnsw(ds, m=2, ef_construction=4, seed=7)
        dco = FingerDco.fit(idx, ds, l_bits=64, seed=8)
        q = np.zeros(8, dtype=np.float32)
        q[0] = 0.5
        q[1] = 2.0  # residual along axis 1, parallel to v's residual
        ctx = dco.preprocess_query(q)
        slots = idx.nbr0[0, : idx.cnt0[0]].tolist()
        if 1 in slots:
            est = dco.estimate_sq(ctx, 1, from_node=0)
            assert est == pytest.approx(squared_distance(q, ds.vectors[1]), rel=1e-3)

    def test_hamming_symmetry(self, geo_setup):
        ds, idx, dco = geo_setup
        ctx = dco.preprocess_query(synth.gaussian_correlated(1, 32, seed=55).vectors[0])
        c = int(np.argmax(idx.cnt0))
        state = dco._hop_state(ctx, c, count_dims=False)
        qbits = state[3]
        ebits = dco.model.bits[c, 0]
        h1 = sum(int(qbits[w] ^ ebits[w]).bit_count() for w in range(dco.model.words))
        h2 = sum(int(ebits[w] ^ qbits[w]).bit_count() for w in range(dco.model.words))
        assert h1 == h2

    def test_estimate_requires_hop_source(self, geo_setup):
        _, _, dco = geo_setup
        ctx = dco.preprocess_query(np.zeros(32, dtype=np.float32))
        with pytest.raises(ValueError, match="hop source"):
            dco.estimate_sq(ctx, 5)


class TestSearchBehavior:
    def test_false_negative_ratio_exceeds_lower_bound_dcos(self):
        # aggressive scale factor: the sign-bit estimator must produce false
        # negatives while true lower bounds produce exactly none
        ds = synth.gaussian_correlated(3000, 48, seed=56)
        qs = synth.gaussian_correlated(30, 48, seed=57)
        idx = build_hnsw(ds, m=8, ef_construction=100, seed=58)
        finger = FingerDco.fit(idx, ds, l_bits=64, seed=59, alpha=1.0)
        pca = TransformDco.fit("pca", ds)
        idx_pca = idx.with_dataset(pca.search_dataset)
        fn_f = t_f = fn_p = t_p = 0
        for qi in range(qs.count):
            rf = beam_search(idx, qs.vectors[qi], 10, 50, finger, audit=True)
            rp = beam_search(idx_pca, qs.vectors[qi], 10, 50, pca, audit=True)
            fn_f += rf.stats.false_negatives
            t_f += rf.stats.comparisons
            fn_p += rp.stats.false_negatives
            t_p += rp.stats.comparisons
        assert fn_p == 0
        assert fn_f / t_f > fn_p / t_p

    def test_counters_cover_hop_setup(self, geo_setup):
        ds, idx, dco = geo_setup
        res = beam_search(idx, synth.gaussian_correlated(1, 32, seed=60).vectors[0],
                          5, 30, dco)
        st = res.stats
        assert st.pruned_count + st.full_dist_count == st.comparisons
        # at least L bits per comparison plus D per admitted candidate
        assert st.dims_evaluated >= dco.model.l_bits * st.comparisons \
            + ds.dim * st.full_dist_count
