import numpy as np
import pytest

from dcobench import synth
from dcobench.data import squared_distance
from dcobench.dco import ExactDco, LshDco, OpqDco, TransformDco
from dcobench.dco.base import CompareOutcome, PRUNED


class TestContract:
    def test_exact_always_admits(self, small_corr):
        dco = ExactDco(small_corr)
        ctx = dco.preprocess_query(small_corr.vectors[0])
        out = dco.compare(ctx, -1, 5, float("inf"))
        assert not out.pruned
        assert out.dist_sq == squared_distance(small_corr.vectors[0], small_corr.vectors[5])
        out2 = dco.compare(ctx, -1, 5, 1e-9)
        assert not out2.pruned  # the baseline never prunes, the caller rejects

    def test_exact_context_is_identity(self, small_corr):
        dco = ExactDco(small_corr)
        ctx = dco.preprocess_query(small_corr.vectors[3])
        assert np.array_equal(ctx.query, small_corr.vectors[3])
        assert ctx.stats.preprocess_s >= 0

    def test_admit_matches_oracle_all_families(self, small_corr, small_index):
        qs = synth.gaussian_correlated(3, small_corr.dim, seed=7)
        dcos = [
            ExactDco(small_corr),
            TransformDco.fit("pca", small_corr),
            TransformDco.fit("dwt", small_corr),
            TransformDco.fit("ads", small_corr, seed=3),
            LshDco.fit(small_corr, d=16, p_tau=0.9, seed=4),
            OpqDco.fit(small_corr, m=4, ks=16, t1=3, t2=3, seed=5),
        ]
        for dco in dcos:
            data = dco.search_dataset
            for qi in range(3):
                ctx = dco.preprocess_query(qs.vectors[qi])
                for cand in (0, 11, 222):
                    out = dco.compare(ctx, -1, cand, float("inf"))
                    assert not out.pruned, dco.name
                    oracle = squared_distance(ctx.query, data.vectors[cand])
                    assert out.dist_sq == pytest.approx(oracle, rel=1e-3), dco.name

    def test_never_prune_while_results_not_full(self, small_corr):
        # threshold = +inf encodes "results heap not full": no family may prune
        qs = synth.gaussian_correlated(2, small_corr.dim, seed=8)
        dcos = [
            TransformDco.fit("pca", small_corr),
            TransformDco.fit("ads", small_corr, seed=3),
            LshDco.fit(small_corr, d=8, p_tau=0.5, seed=4),
            OpqDco.fit(small_corr, m=4, ks=16, t1=2, t2=2, seed=5),
        ]
        for dco in dcos:
            ctx = dco.preprocess_query(qs.vectors[0])
            for cand in range(0, 100, 7):
                assert not dco.compare(ctx, -1, cand, float("inf")).pruned

    def test_counter_identity_under_interleaving(self, small_corr):
        rng = np.random.default_rng(9)
        q = synth.gaussian_correlated(1, small_corr.dim, seed=10).vectors[0]
        dcos = [
            ExactDco(small_corr),
            TransformDco.fit("pca", small_corr),
            LshDco.fit(small_corr, d=16, p_tau=0.9, seed=4),
            OpqDco.fit(small_corr, m=4, ks=16, t1=2, t2=2, seed=5),
        ]
        ctxs = [d.preprocess_query(q) for d in dcos]
        for _ in range(300):
            pick = int(rng.integers(len(dcos)))
            cand = int(rng.integers(small_corr.count))
            thr = float(rng.choice([0.5, 5.0, 50.0, 500.0, float("inf")]))
            dcos[pick].compare(ctxs[pick], -1, cand, thr)
        for ctx in ctxs:
            st = ctx.stats
            assert st.pruned_count + st.full_dist_count == st.comparisons

    def test_compare_outcome_shape(self):
        assert PRUNED.pruned and np.isnan(PRUNED.dist_sq)
        out = CompareOutcome.admit(2.5)
        assert not out.pruned and out.dist_sq == 2.5

    def test_constructed_lower_bound_exceedance(self, small_corr):
        # a partial sum over the first block already above the threshold prunes
        dco = TransformDco.fit("pca", small_corr)
        q = synth.gaussian_correlated(1, small_corr.dim, seed=11).vectors[0]
        ctx = dco.preprocess_query(q)
        data = dco.search_dataset.vectors
        delta = dco.model.delta_d
        for cand in range(small_corr.count):
            d = (ctx.query[:delta] - data[cand, :delta]).astype(np.float64)
            first_block = float(d @ d)
            if first_block > 1.0:
                before = ctx.stats.dims_evaluated
                out = dco.compare(ctx, -1, cand, first_block * 0.8)
                assert out.pruned
                assert ctx.stats.dims_evaluated - before == delta
                break
        else:
            pytest.fail("no candidate with a large first block found")
