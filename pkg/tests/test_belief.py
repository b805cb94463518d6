import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from pairsearch.belief import (
    AdfIntermediates,
    GaussianBelief,
    adf_intermediates,
    adf_update,
    density_score,
    density_scores,
    optimal_hyperplane,
    top_direction,
)
from pairsearch.exceptions import CovarianceError
from pairsearch.geometry import Hyperplane


def tilted_moments_quadrature(mu, sigma, w, b, sigma_eps, nodes=150):
    """Independent oracle: exact moments of the probit-tilted Gaussian by
    tensor-product Gauss-Hermite quadrature (no rank-one shortcuts)."""
    mu = np.atleast_1d(np.asarray(mu, float))
    sigma = np.atleast_2d(np.asarray(sigma, float))
    d = mu.size
    x_nodes, weights = hermegauss(nodes)
    L = np.linalg.cholesky(sigma)
    if d == 1:
        xi = x_nodes[:, None]
        wt = weights
    elif d == 2:
        g1, g2 = np.meshgrid(x_nodes, x_nodes, indexing="ij")
        xi = np.stack([g1.ravel(), g2.ravel()], axis=1)
        wt = np.outer(weights, weights).ravel()
    else:
        raise ValueError("oracle supports d <= 2")
    pts = mu + xi @ L.T
    tilt = ndtr((pts @ np.asarray(w, float) + b) / sigma_eps)
    Z = float(np.sum(wt * tilt))
    m1 = (wt * tilt) @ pts / Z
    diff = pts - m1
    m2 = (diff * (wt * tilt)[:, None]).T @ diff / Z
    return m1, m2


def random_belief(rng, d):
    mu = rng.uniform(-2, 2, d)
    A = rng.uniform(-1, 1, (d, d))
    sigma = A @ A.T + np.diag(rng.uniform(0.1, 2.0, d))
    return GaussianBelief(mu, sigma)


def random_unit(rng, d):
    w = rng.standard_normal(d)
    return w / np.linalg.norm(w)


class TestTopDirection:
    def test_axis_aligned(self):
        w = top_direction(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(np.abs(w), [1.0, 0.0], atol=1e-12)

    def test_identity_tie_break(self):
        w = top_direction(np.eye(3))
        np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-12)

    def test_degenerate_subspace_tie_break(self):
        # dominant eigenspace spans e2, e3: canonical pick projects e1 first
        # (zero), then e2
        s = np.diag([1.0, 5.0, 5.0])
        w = top_direction(s)
        np.testing.assert_allclose(w, [0.0, 1.0, 0.0], atol=1e-9)

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d = int(rng.integers(2, 21))
            A = rng.standard_normal((d, d))
            s = A @ A.T + 1e-3 * np.eye(d)
            w = top_direction(s)
            lam_max = float(np.linalg.eigvalsh(s)[-1])
            assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-9)
            assert float(w @ s @ w) >= (1 - 1e-6) * lam_max

    def test_power_method_path(self):
        # d > 32 forces power iteration; clear spectral gap
        rng = np.random.default_rng(1)
        d = 40
        vals = np.concatenate([[10.0], rng.uniform(0.1, 5.0, d - 1)])
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        s = (Q * vals) @ Q.T
        w = top_direction(s)
        lam_max = float(np.linalg.eigvalsh(s)[-1])
        assert float(w @ s @ w) >= (1 - 1e-6) * lam_max
        # warm start converges too
        w2 = top_direction(s, warm_start=w)
        assert float(w2 @ s @ w2) >= (1 - 1e-6) * lam_max

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            top_direction(np.array([[np.inf, 0.0], [0.0, 1.0]]))


class TestOptimalHyperplane:
    def test_axis_aligned_through_mean(self):
        h = optimal_hyperplane(GaussianBelief([0.0, 0.0], np.diag([4.0, 1.0])))
        np.testing.assert_allclose(np.abs(h.w), [1.0, 0.0], atol=1e-12)
        assert h.b == pytest.approx(0.0, abs=1e-9)

    def test_offset_mean(self):
        h = optimal_hyperplane(GaussianBelief([1.0, 2.0], np.diag([9.0, 1.0])))
        np.testing.assert_allclose(np.abs(h.w), [1.0, 0.0], atol=1e-12)
        assert float(h.w @ [1.0, 2.0]) + h.b == pytest.approx(0.0, abs=1e-9)

    def test_maximal_information_gain_monte_carlo(self):
        """Among 500 random through-mean hyperplanes, the one returned
        attains the best Monte Carlo estimate of the query information
        gain (entropy of the expected answer minus the expected answer
        entropy), up to 3-sigma MC error on paired batch estimates."""
        rng = np.random.default_rng(2)
        belief = random_belief(rng, 4)
        samples = belief.mu + rng.standard_normal((10_000, 4)) @ np.linalg.cholesky(belief.sigma).T

        def gains(w):
            b = -float(w @ belief.mu)
            p = ndtr(samples @ w + b)
            ph = np.clip(p, 1e-12, 1 - 1e-12)
            h_y = -(ph * np.log2(ph) + (1 - ph) * np.log2(1 - ph))
            # per-batch gain estimates (10 batches)
            out = []
            for blk_p, blk_h in zip(np.split(p, 10), np.split(h_y, 10)):
                pbar = np.clip(blk_p.mean(), 1e-12, 1 - 1e-12)
                marg = -(pbar * np.log2(pbar) + (1 - pbar) * np.log2(1 - pbar))
                out.append(marg - blk_h.mean())
            return np.asarray(out)

        g_star = gains(optimal_hyperplane(belief).w)
        for _ in range(500):
            g_rand = gains(random_unit(rng, 4))
            diff = g_rand - g_star
            assert diff.mean() <= max(3 * diff.std(ddof=1) / math.sqrt(10), 1e-12)


class TestAdfUpdate:
    def test_closed_form_1d(self):
        belief = GaussianBelief([0.0], [[1.0]])
        h = Hyperplane([1.0], 0.0)
        new = adf_update(belief, h, +1, 1.0)
        assert new.mu[0] == pytest.approx(math.sqrt(1 / math.pi), abs=1e-12)
        assert new.sigma[0, 0] == pytest.approx(1 - 1 / math.pi, abs=1e-12)

    def test_mean_moves_with_outcome(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            d = int(rng.integers(1, 6))
            belief = random_belief(rng, d)
            w = random_unit(rng, d)
            h = Hyperplane(w, -float(w @ belief.mu))  # through the mean
            outcome = int(rng.choice([-1, 1]))
            new = adf_update(belief, h, outcome, 0.7)
            assert np.sign(float(w @ new.mu) + h.b) == outcome

    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(4)
        for trial in range(60):
            d = 1 if trial % 2 == 0 else 2
            belief = random_belief(rng, d)
            w = random_unit(rng, d)
            b = float(rng.uniform(-2, 2))
            sigma_eps = float(rng.uniform(0.3, 2.0))
            outcome = int(rng.choice([-1, 1]))
            new = adf_update(belief, Hyperplane(w, b), outcome, sigma_eps)
            ww, bb = (w, b) if outcome == 1 else (-w, -b)
            m1, m2 = tilted_moments_quadrature(belief.mu, belief.sigma, ww, bb,
                                               sigma_eps)
            np.testing.assert_allclose(new.mu, m1, atol=1e-6)
            np.testing.assert_allclose(new.sigma, m2, atol=1e-6)

    def test_variance_strictly_shrinks_along_normal(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            belief = random_belief(rng, 3)
            w = random_unit(rng, 3)
            h = Hyperplane(w, float(rng.uniform(-1, 1)))
            new = adf_update(belief, h, +1, 0.5)
            assert float(w @ new.sigma @ w) < float(w @ belief.sigma @ w)

    def test_trace_monotone(self):
        rng = np.random.default_rng(6)
        belief = random_belief(rng, 4)
        for _ in range(30):
            w = random_unit(rng, 4)
            h = Hyperplane(w, float(rng.uniform(-1, 1)))
            new = adf_update(belief, h, int(rng.choice([-1, 1])), 0.6)
            assert float(np.trace(new.sigma)) < float(np.trace(belief.sigma))
            belief = new

    def test_orthogonal_subspace_untouched_in_precision(self):
        # the update adds tau * w w' to the precision matrix, so for any
        # u orthogonal to w the precision quadratic form is unchanged
        rng = np.random.default_rng(7)
        for _ in range(30):
            belief = random_belief(rng, 4)
            w = random_unit(rng, 4)
            h = Hyperplane(w, float(rng.uniform(-1, 1)))
            new = adf_update(belief, h, +1, 0.8)
            basis = np.linalg.qr(np.column_stack([w, np.eye(4)]))[0][:, 1:4]
            before = basis.T @ np.linalg.inv(belief.sigma) @ basis
            after = basis.T @ np.linalg.inv(new.sigma) @ basis
            np.testing.assert_allclose(after, before, atol=1e-9)

    def test_isotropic_covariance_untouched_off_normal(self):
        # with an isotropic belief, sigma w is parallel to w, so the
        # covariance itself is unchanged orthogonally to w as well
        rng = np.random.default_rng(17)
        belief = GaussianBelief(rng.uniform(-1, 1, 3), 0.7 * np.eye(3))
        w = random_unit(rng, 3)
        new = adf_update(belief, Hyperplane(w, 0.1), +1, 0.8)
        basis = np.linalg.qr(np.column_stack([w, np.eye(3)]))[0][:, 1:3]
        np.testing.assert_allclose(basis.T @ new.sigma @ basis,
                                   basis.T @ belief.sigma @ basis, atol=1e-9)

    def test_outcome_symmetry_exact(self):
        rng = np.random.default_rng(8)
        belief = random_belief(rng, 3)
        w = random_unit(rng, 3)
        h = Hyperplane(w, 0.3)
        a = adf_update(belief, h, +1, 0.5)
        b = adf_update(belief, h.flip(), -1, 0.5)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_intermediates_signs_and_stability(self):
        belief = GaussianBelief([0.0, 0.0], np.eye(2))
        w = np.array([1.0, 0.0])
        for b in (-37.0, -20.0, -8.0, 0.0, 8.0, 20.0, 37.0):
            terms = adf_intermediates(belief, Hyperplane(w, b), 1.0)
            assert isinstance(terms, AdfIntermediates)
            assert math.isfinite(terms.alpha) and math.isfinite(terms.beta)
            assert math.isfinite(terms.tau) and math.isfinite(terms.nu)
            assert terms.beta < 0
            assert terms.tau > 0

    def test_bad_outcome_rejected(self):
        belief = GaussianBelief([0.0], [[1.0]])
        with pytest.raises(ValueError):
            adf_update(belief, Hyperplane([1.0], 0.0), 0, 1.0)


class TestBeliefValue:
    def test_validation(self):
        with pytest.raises(ValueError):
            GaussianBelief([0.0, 0.0], np.array([[1.0, 0.5], [0.4, 1.0]]))
        with pytest.raises(CovarianceError):
            GaussianBelief([0.0, 0.0], np.diag([1.0, -0.1]))

    def test_immutable_arrays(self):
        belief = GaussianBelief([0.0], [[1.0]])
        with pytest.raises(ValueError):
            belief.mu[0] = 1.0


class TestDensityScore:
    def test_mean_is_mode(self):
        rng = np.random.default_rng(9)
        belief = random_belief(rng, 3)
        xs = rng.uniform(-3, 3, (50, 3))
        best = max(density_score(belief, x) for x in xs)
        assert density_score(belief, belief.mu) > best - 1e-12 or \
            density_score(belief, belief.mu) >= best

    def test_isotropic_ordering_matches_distance(self):
        belief = GaussianBelief([1.0, -1.0], np.eye(2))
        rng = np.random.default_rng(10)
        xs = rng.uniform(-3, 3, (100, 2))
        scores = density_scores(belief, xs)
        d2 = np.sum((xs - belief.mu) ** 2, axis=1)
        np.testing.assert_array_equal(np.argsort(-scores), np.argsort(d2, kind="stable"))

    def test_matches_reference_logpdf(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            belief = random_belief(rng, 4)
            xs = rng.uniform(-3, 3, (10, 4))
            ref = multivariate_normal(belief.mu, belief.sigma).logpdf(xs)
            np.testing.assert_allclose(density_scores(belief, xs), ref, atol=1e-9)
