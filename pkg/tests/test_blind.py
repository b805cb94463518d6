import numpy as np
import pytest

from pairsearch.blind import (
    MODE_GROUND_TRUTH,
    MODE_LEARNED,
    BlindConfig,
    estimate_dim,
    run_blind,
    sliding_window_means,
)
from pairsearch.catalog import build_index
from pairsearch.embed import TrainConfig
from pairsearch.harness import gen_hypercube
from pairsearch.oracle import calibrate_sigma


def small_config(episodes=400, dim=3, seed=0):
    return BlindConfig(
        episodes=episodes,
        schedule=frozenset(2 ** k for k in range(9)),
        train=TrainConfig(dim=dim, epochs=30, rng_seed=seed),
        max_steps=60,
        window=min(100, episodes),
        rng_seed=seed,
    )


class TestEstimateDim:
    def test_exact_low_rank_subspace(self):
        rng = np.random.default_rng(0)
        basis = rng.standard_normal((3, 100))
        nu = rng.standard_normal((500, 3)) @ basis
        assert estimate_dim(nu, 0.98) == 3

    def test_isotropic_needs_all_dims(self):
        rng = np.random.default_rng(1)
        nu = rng.standard_normal((10_000, 10))
        assert estimate_dim(nu, 0.98) == 10

    def test_energy_validation(self):
        with pytest.raises(ValueError):
            estimate_dim(np.zeros((5, 2)), 0.0)
        with pytest.raises(ValueError):
            estimate_dim(np.zeros((1, 2)), 0.98)


class TestSlidingWindow:
    def test_flat_series(self):
        w = sliding_window_means(np.full(50, 7.0), 10)
        np.testing.assert_allclose(w, 7.0)

    def test_centered_average(self):
        q = np.arange(100, dtype=float)
        w = sliding_window_means(q, 11)
        assert w[50] == pytest.approx(np.mean(q[45:56]))


@pytest.fixture(scope="module")
def planted():
    objects = gen_hypercube(200, 3, seed=0)
    sigma = calibrate_sigma(objects.vectors, 0.10, seed=0)
    return objects, sigma


class TestRunBlind:

    def test_learning_reduces_query_counts(self, planted):
        objects, sigma = planted
        res = run_blind(objects, sigma, small_config(episodes=500), MODE_LEARNED)
        early = res.queries[:100].mean()
        late = res.queries[-150:].mean()
        assert late < 0.75 * early

    def test_ground_truth_mode_is_flat_and_fast(self, planted):
        objects, sigma = planted
        res = run_blind(objects, sigma, small_config(episodes=300), MODE_GROUND_TRUTH)
        assert res.queries[:100].mean() < 20
        assert abs(res.queries[:150].mean() - res.queries[150:].mean()) < 4

    def test_empty_schedule_never_improves(self, planted):
        objects, sigma = planted
        cfg = BlindConfig(episodes=300, schedule=frozenset(),
                          train=TrainConfig(dim=3, epochs=10, rng_seed=0),
                          max_steps=60, window=100, rng_seed=0)
        res = run_blind(objects, sigma, cfg, MODE_LEARNED)
        early = res.queries[:100].mean()
        late = res.queries[-100:].mean()
        assert late > 0.8 * early
        assert not res.snapshots

    def test_store_size_equals_answered_queries(self, planted):
        # every answered query contributes exactly one triplet; episodes
        # that found the target leave their final query unanswered
        objects, sigma = planted
        res = run_blind(objects, sigma, small_config(episodes=120), MODE_LEARNED)
        answered = int(res.queries.sum()) - int(res.found.sum())
        assert len(res.store) == answered

    def test_effective_noise_term_shrinks_with_training(self, planted):
        objects, sigma = planted
        res = run_blind(objects, sigma, small_config(episodes=500), MODE_LEARNED)
        early = np.nanmean(res.mean_wpsi[:64])
        late = np.nanmean(res.mean_wpsi[-150:])
        assert late < early

    def test_snapshots_at_schedule_points(self, planted):
        objects, sigma = planted
        res = run_blind(objects, sigma, small_config(episodes=70), MODE_LEARNED)
        assert set(res.snapshots) == {1, 2, 4, 8, 16, 32, 64}


class TestMahalanobisExploration:
    def test_uncertain_objects_selected_more_often(self):
        """Objects with inflated positional variance draw lookups toward
        them under the uncertainty-aware metric, relative to plain
        Euclidean lookups with identical draws."""
        rng = np.random.default_rng(2)
        n = 200
        nu = rng.standard_normal((n, 3))
        psi = np.full((n, 3), 0.05)
        uncertain = rng.choice(n, size=n // 2, replace=False)
        psi[uncertain] = 4.0
        index = build_index(nu)
        hits_maha = 0
        hits_euclid = 0
        flags = np.zeros(n, dtype=bool)
        flags[uncertain] = True
        for _ in range(1000):
            z = rng.standard_normal(3)
            hits_maha += bool(flags[index.nearest_unused_mahalanobis(z, set(), psi)])
            hits_euclid += bool(flags[index.nearest_unused(z)])
        assert hits_maha > hits_euclid + 100
