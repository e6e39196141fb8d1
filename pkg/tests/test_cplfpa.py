import dataclasses

import numpy as np
import pytest

from glrtml.benchmark import BenchmarkConfig, run_benchmark
from glrtml.clustering import kmeans
from glrtml.cplfpa import AdaptConfig, adapt, adapt_gmm, adapt_mg, build_pseudo_pairs
from glrtml.errors import InvalidConfig, NoNegativePairs, NoPositivePairs, TooFewPoints
from glrtml.glrt_gmm import em_fit, symmetrize
from glrtml.glrt_mg import fit_mg_model
from glrtml.numerics import ClipMode
from glrtml.pairs import pair_diffs, sample_pairs
from glrtml.trainer import TrainConfig, train


def clustered(rng, n_clusters=4, per=30, d=3, sep=10.0):
    centers = rng.normal(scale=sep, size=(n_clusters, d))
    pts = np.concatenate([c + rng.normal(size=(per, d)) for c in centers])
    return pts, np.repeat(np.arange(n_clusters), per)


class TestKmeans:
    def test_separable_blobs(self, rng):
        pts = np.concatenate([rng.normal(size=(20, 2)) * 0.1, 50 + rng.normal(size=(20, 2)) * 0.1])
        lab = kmeans(pts, 2, seed=0).assignments
        assert len(set(lab[:20])) == 1 and len(set(lab[20:])) == 1 and lab[0] != lab[20]

    def test_k_equals_n(self, rng):
        pts = rng.normal(size=(6, 3))
        assert kmeans(pts, 6, seed=1).inertia == 0.0

    def test_deterministic(self, rng):
        pts, _ = clustered(rng)
        a, b = kmeans(pts, 4, seed=3, n_init=3), kmeans(pts, 4, seed=3, n_init=3)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        assert a.inertia == b.inertia

    @pytest.mark.parametrize("seed", range(10))
    def test_inertia_nonincreasing(self, seed):
        pts = np.random.default_rng(seed).normal(size=(200, 4))
        lab = kmeans(pts, 6, seed=seed)
        h = np.array(lab.inertia_history)
        assert np.all(np.diff(h) <= 1e-9)
        assert lab.inertia == pytest.approx(h[-1], abs=1e-9)
        assert set(np.unique(lab.assignments)) <= set(range(6))

    def test_restarts_never_worse(self, rng):
        pts = rng.normal(size=(150, 3))
        assert kmeans(pts, 7, seed=0, n_init=5).inertia <= kmeans(pts, 7, seed=0, n_init=1).inertia

    def test_errors(self, rng):
        with pytest.raises(TooFewPoints):
            kmeans(rng.normal(size=(3, 2)), 4)
        with pytest.raises(ValueError):
            kmeans(rng.normal(size=(5, 2)), 2, n_init=0)


class TestPseudoPairs:
    def test_counts(self, rng):
        e = rng.normal(size=(4, 2))
        pos, neg, _, _ = build_pseudo_pairs(e, [0, 0, 1, 1], AdaptConfig())
        assert len(pos) == 2 and len(neg) == 4

    def test_budget_cap(self, rng):
        e = rng.normal(size=(20, 2))
        cfg = AdaptConfig(pos_budget=1, neg_budget=1, seed=4)
        pos, neg, pi, ni = build_pseudo_pairs(e, np.arange(20) % 3, cfg)
        assert len(pos) == len(neg) == 1
        again = build_pseudo_pairs(e, np.arange(20) % 3, cfg)
        np.testing.assert_array_equal(pi, again[2])
        np.testing.assert_array_equal(ni, again[3])
        np.testing.assert_array_equal(pos[0], e[pi[0, 0]] - e[pi[0, 1]])

    def test_single_cluster(self, rng):
        with pytest.raises(NoNegativePairs):
            build_pseudo_pairs(rng.normal(size=(5, 2)), np.zeros(5, dtype=int), AdaptConfig())

    def test_singletons(self, rng):
        with pytest.raises(NoPositivePairs):
            build_pseudo_pairs(rng.normal(size=(5, 2)), np.arange(5), AdaptConfig())
        with pytest.raises(NoPositivePairs):
            adapt_mg(rng.normal(size=(5, 2)), np.arange(5), AdaptConfig())

    def test_coverage_check(self, rng):
        with pytest.raises(ValueError):
            build_pseudo_pairs(rng.normal(size=(5, 2)), [0, 1], AdaptConfig())


class TestAdaptModels:
    def test_oracle_labels(self, rng):
        e, y = clustered(rng)
        cfg = AdaptConfig(pos_budget=300, neg_budget=500, seed=2)
        model = adapt_mg(e, y, cfg)
        pos, neg = sample_pairs(y, 300, 500, np.random.default_rng([2, 7]))
        oracle = fit_mg_model(pair_diffs(e, pos), pair_diffs(e, neg))
        assert model.to_dict() == oracle.to_dict()

    def test_gmm_single_component_matches_mg(self, rng):
        e, y = clustered(rng)
        cfg = AdaptConfig(seed=5)
        mg = adapt_mg(e, y, cfg, ridge_rel=0.0, clip_mode=ClipMode.NO_CLIP)
        gmm = adapt_gmm(e, y, cfg, cov_floor=1e-300)
        ridge = np.eye(e.shape[1]) * 1e-10
        np.testing.assert_allclose(gmm.h1.covs[0], mg.sigma1 - ridge, rtol=0, atol=1e-8)
        np.testing.assert_allclose(gmm.h0.covs[0], mg.sigma0 - ridge, rtol=0, atol=1e-8 * np.abs(mg.sigma0).max())
        assert np.all(gmm.h1.means == 0) and np.all(gmm.h0.means == 0)

    def test_gmm_deterministic(self, rng):
        e, y = clustered(rng)
        cfg = AdaptConfig(k0=2, seed=1)
        assert adapt_gmm(e, y, cfg).to_dict() == adapt_gmm(e, y, cfg).to_dict()

    def test_diagonal_mixture_monotone(self, rng):
        e, _ = clustered(rng, n_clusters=4)
        lab = kmeans(e, 4, seed=0)
        _, neg, _, _ = build_pseudo_pairs(e, lab, AdaptConfig(seed=0))
        _, hist = em_fit(symmetrize(neg), 4, seed=0, diagonal=True, symmetric=True)
        assert np.all(np.diff(hist) >= -1e-9)

    def test_resampling_noise(self):
        rng = np.random.default_rng(0)
        e, y = clustered(rng, n_clusters=6, per=120, d=4, sep=12.0)
        lab = kmeans(e, 6, seed=0, n_init=10)
        adapted = adapt_mg(e, lab, AdaptConfig(seed=9))
        ref = fit_mg_model(*[pair_diffs(e, p) for p in sample_pairs(y, 20_000, 20_000, rng)])
        for a, b in ((adapted.sigma1, ref.sigma1), (adapted.sigma0, ref.sigma0)):
            assert np.linalg.norm(a - b) / np.linalg.norm(b) < 0.1


def small_trained(seed=0):
    rng = np.random.default_rng(seed)
    x, y = clustered(rng, n_clusters=4, per=30, d=6)
    rep = train(x, y, TrainConfig(t0=5, t1_minus_t0=2, d=4, hidden=8, batch_size=32, seed=seed))
    return rep, x


class TestAdapt:
    def test_embedder_untouched_and_deterministic(self):
        rep, x = small_trained()
        before = rep.params.copy()
        cfg = AdaptConfig(k=4, pos_budget=500, neg_budget=500, seed=3)
        a, b = adapt(rep.params, x, cfg), adapt(rep.params, x, cfg)
        assert rep.params.equals(before)
        assert a.model.to_dict() == b.model.to_dict()
        np.testing.assert_array_equal(a.labeling.assignments, b.labeling.assignments)
        assert set(a.timing) == {"forward_ms", "clustering_ms", "diff_ms", "update_ms", "total_ms"}
        assert a.timing["total_ms"] >= a.timing["clustering_ms"] + a.timing["update_ms"]

    def test_parameter_counts(self):
        rep, x = small_trained()
        mg = adapt(rep.params, x, AdaptConfig(k=4, seed=0))
        assert mg.parameters_updated == {"covariance_entries": 4 * 5, "form_entries": 16}
        gmm = adapt(rep.params, x, AdaptConfig(k=4, seed=0, variant="gmm", k1=1, k0=3))
        assert gmm.parameters_updated["mixture_entries"] == 4 * 4 * 6 // 2 + 4
        assert gmm.model.h0.k == 3

    def test_config_validation(self):
        for bad in (dict(k=1), dict(pos_budget=0), dict(variant="x"), dict(n_init=0)):
            with pytest.raises(InvalidConfig):
                AdaptConfig(**bad).validate()


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_no_shift_neutrality(seed):
    base = BenchmarkConfig()
    cfg = dataclasses.replace(base, adapt_k=base.synth.num_classes, synth=dataclasses.replace(
        base.synth, per_class=120, distractors=0, shift_rotation_deg=0.0, shift_scale=1.0))
    out = run_benchmark(cfg, seed)
    assert abs(out["target_adapted"] - out["target_unadapted"]) <= 0.01
