import mpmath
import numpy as np
import pytest

from dcobench import beam_search, build_hnsw
from dcobench.data import VectorSet, save_vectors, squared_distance
from dcobench.dco import (
    ExactDco,
    ExternalDco,
    LshDco,
    chi2_quantile,
    fit_pca,
    load_external_projection,
)


def chi2_quantile_oracle(dof: int, p: float) -> float:
    """Independent oracle: bisection on the regularized incomplete-gamma CDF."""

    def cdf(x):
        return float(mpmath.gammainc(dof / 2, 0, x / 2, regularized=True))

    lo, hi = 0.0, 1.0
    while cdf(hi) < p:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


class TestChi2Quantile:
    def test_frozen_oracle_values(self):
        # values computed with the mpmath bisection oracle above
        assert chi2_quantile(2, 0.95) == pytest.approx(5.991464547, rel=1e-3)
        assert chi2_quantile(1, 0.5) == pytest.approx(0.4549364231, rel=1e-3)

    @pytest.mark.parametrize("dof", [1, 2, 8, 64])
    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9, 0.99])
    def test_matches_oracle(self, dof, p):
        assert chi2_quantile(dof, p) == pytest.approx(chi2_quantile_oracle(dof, p), rel=1e-3)

    def test_monotone_in_p(self):
        for dof in (1, 4, 16, 64):
            assert chi2_quantile(dof, 0.99) > chi2_quantile(dof, 0.9)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                chi2_quantile(4, bad)
        with pytest.raises(ValueError):
            chi2_quantile(0, 0.5)


class TestLsh:
    def test_zero_vector_projects_to_zero(self, small_corr):
        dco = LshDco.fit(small_corr, d=8, p_tau=0.9, seed=1)
        ctx = dco.preprocess_query(np.zeros(small_corr.dim, dtype=np.float32))
        assert np.all(ctx.proj_query == 0.0)

    def test_projection_bit_stable(self, small_corr):
        a = LshDco.fit(small_corr, d=16, p_tau=0.9, seed=2)
        b = LshDco.fit(small_corr, d=16, p_tau=0.9, seed=2)
        assert np.array_equal(a.matrix, b.matrix)
        assert np.array_equal(a.projected.vectors, b.projected.vectors)

    def test_estimator_unbiased(self):
        d, dim, n = 64, 128, 10000
        rng = np.random.default_rng(3)
        x = rng.standard_normal((n, dim)).astype(np.float32)
        y = rng.standard_normal((n, dim)).astype(np.float32)
        p = rng.standard_normal((d, dim)).astype(np.float32)
        px, py = x @ p.T, y @ p.T
        s = np.einsum("ij,ij->i", (px - py).astype(np.float64), (px - py).astype(np.float64))
        d2 = np.einsum("ij,ij->i", (x - y).astype(np.float64), (x - y).astype(np.float64))
        assert abs(float((s / (d * d2)).mean()) - 1.0) < 0.03

    def test_p_tau_one_never_prunes(self, small_corr):
        dco = LshDco.fit(small_corr, d=8, p_tau=1.0, seed=4)
        assert dco.prune_mult == float("inf")
        ctx = dco.preprocess_query(small_corr.vectors[0])
        for cand in range(0, 200, 11):
            assert not dco.compare(ctx, -1, cand, 1e-6).pruned

    def test_false_dismissal_bound(self):
        # qualified candidate at threshold == true distance: wrong-prune
        # probability is exactly 1 - p_tau; average over several matrices
        dim, d, p_tau = 64, 64, 0.9
        total = wrong = 0
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            cands = VectorSet(rng.standard_normal((400, dim)).astype(np.float32))
            dco = LshDco.fit(cands, d=d, p_tau=p_tau, seed=seed)
            pv = dco.projected.vectors
            for qi in range(20):
                q = rng.standard_normal(dim).astype(np.float32)
                ctx = dco.preprocess_query(q)
                diffs = (cands.vectors - ctx.query).astype(np.float64)
                d2 = np.einsum("ij,ij->i", diffs, diffs)
                ps = (pv - ctx.proj_query).astype(np.float64)
                s = np.einsum("ij,ij->i", ps, ps)
                wrong += int((s > dco.prune_mult * d2).sum())
                total += d2.size
        rate = wrong / total
        assert rate <= (1 - p_tau) + 0.02

    def test_validation(self, small_corr):
        with pytest.raises(ValueError):
            LshDco.fit(small_corr, d=0, p_tau=0.9)
        with pytest.raises(ValueError):
            LshDco.fit(small_corr, d=4, p_tau=0.0)


class TestExternal:
    def make_pca16(self, dataset, queries):
        """External embeddings = first 16 eigen-projection coordinates."""
        model = fit_pca(dataset)
        w = model.rotation[:16].astype(np.float32)
        bias = (-w @ model.mean).astype(np.float32)
        emb = VectorSet(dataset.vectors @ w.T + bias)
        qemb = VectorSet(queries.vectors @ w.T + bias)
        return emb, qemb, w, bias

    def test_count_mismatch_rejected(self, small_corr):
        emb = VectorSet(np.zeros((small_corr.count - 1, 4), dtype=np.float32))
        with pytest.raises(ValueError, match="count"):
            ExternalDco(small_corr, emb)

    def test_missing_query_side_raises(self, small_corr):
        emb = VectorSet(np.zeros((small_corr.count, 4), dtype=np.float32))
        dco = ExternalDco(small_corr, emb)
        with pytest.raises(ValueError, match="query"):
            dco.preprocess_query(small_corr.vectors[0])

    def test_query_embeddings_need_query_id(self, small_corr, small_queries):
        emb, qemb, _, _ = self.make_pca16(small_corr, small_queries)
        dco = ExternalDco(small_corr, emb, query_embeddings=qemb)
        with pytest.raises(ValueError, match="query_id"):
            dco.preprocess_query(small_queries.vectors[0])
        ctx = dco.preprocess_query(small_queries.vectors[3], query_id=3)
        assert np.array_equal(ctx.proj_query, qemb.vectors[3])

    def test_biased_low_dim_estimator_ar_below_one(self, small_corr, small_queries):
        # a truncated eigenbasis underestimates distances: AR median < 1
        emb, _, w, bias = self.make_pca16(small_corr, small_queries)
        dco = ExternalDco(small_corr, emb, query_matrix=w, query_bias=bias)
        ars = []
        for qi in range(small_queries.count):
            ctx = dco.preprocess_query(small_queries.vectors[qi])
            for cand in range(0, small_corr.count, 97):
                true = squared_distance(ctx.query, small_corr.vectors[cand])
                if true <= 0:
                    continue
                est = dco.estimate_sq(ctx, cand)
                ars.append(np.sqrt(est / true))
        assert float(np.median(ars)) < 1.0

    def test_alpha_inf_equals_exact_baseline(self, small_corr, small_index, small_queries):
        emb, _, w, bias = self.make_pca16(small_corr, small_queries)
        dco = ExternalDco(small_corr, emb, alpha=float("inf"), query_matrix=w, query_bias=bias)
        base = ExactDco(small_corr)
        for qi in range(10):
            q = small_queries.vectors[qi]
            a = beam_search(small_index, q, 10, 40, dco)
            b = beam_search(small_index, q, 10, 40, base)
            assert a.ids.tolist() == b.ids.tolist()
            assert a.stats.pruned_count == 0

    def test_load_from_files(self, tmp_path, small_corr, small_queries):
        emb, qemb, w, bias = self.make_pca16(small_corr, small_queries)
        save_vectors(emb, tmp_path / "emb.fvecs", "fvecs")
        save_vectors(VectorSet(w), tmp_path / "qmat.fvecs", "fvecs")
        save_vectors(VectorSet(bias[None, :]), tmp_path / "qbias.fvecs", "fvecs")
        save_vectors(qemb, tmp_path / "qemb.fvecs", "fvecs")
        dco = load_external_projection(
            tmp_path / "emb.fvecs", 1.0, small_corr,
            query_matrix_path=tmp_path / "qmat.fvecs",
            query_bias_path=tmp_path / "qbias.fvecs",
        )
        ctx = dco.preprocess_query(small_queries.vectors[0])
        via_table = load_external_projection(
            tmp_path / "emb.fvecs", 1.0, small_corr,
            query_embeddings_path=tmp_path / "qemb.fvecs",
        )
        ctx2 = via_table.preprocess_query(small_queries.vectors[0], query_id=0)
        assert np.allclose(ctx.proj_query, ctx2.proj_query, atol=1e-5)

    def test_lsh_weaker_than_pca_on_correlated_data(self, small_corr, small_queries):
        # on correlated data the random projection prunes less at vector level
        # than the eigen-ordered lower bound
        from dcobench.dco import TransformDco

        d = small_corr.dim
        lsh = LshDco.fit(small_corr, d=16, p_tau=0.95, seed=9)
        pca = TransformDco.fit("pca", small_corr)
        idx = build_hnsw(small_corr, m=8, ef_construction=100, seed=103)
        idx_pca = idx.with_dataset(pca.search_dataset)

        def pruning(dco, index):
            pruned = comps = 0
            for qi in range(15):
                res = beam_search(index, small_queries.vectors[qi], 10, 50, dco)
                pruned += res.stats.pruned_count
                comps += res.stats.comparisons
            return pruned / comps

        assert pruning(lsh, idx) < pruning(pca, idx_pca)
