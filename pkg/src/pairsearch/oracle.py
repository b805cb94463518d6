"""Simulated comparison answers from ground-truth features.

The answer model is a probit: the probability of naming object i as the
closer one is Phi(s / sigma_eps), where s is the signed distance of the
target to the bisecting hyperplane of the pair. A target on the plane
gets a pure coin flip; far from it the answer is nearly deterministic.
The outcome depends on the pair only through its bisecting hyperplane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import CalibrationError
from .geometry import Hyperplane, as_point, bisect, signed_distance


@dataclass(frozen=True)
class OracleConfig:
    """Answer-noise level and RNG seed. sigma_eps = 0 means noiseless."""

    sigma_eps: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")


def answer_prob(h: Hyperplane, x_t, sigma_eps: float) -> float:
    """Probability that the answer names the object on the positive side of h."""
    s = signed_distance(h, x_t)
    if sigma_eps == 0.0:
        if s > 0:
            return 1.0
        return 0.5 if s == 0 else 0.0
    return float(ndtr(s / sigma_eps))


class Oracle:
    """Stateful answer source over a fixed feature matrix.

    Consumes one uniform draw per sampled answer, so a fixed seed yields
    an identical answer sequence. Use one Oracle (one RNG stream) per
    search episode; streams must not be shared across threads.
    """

    def __init__(self, vectors: np.ndarray, config: OracleConfig, rng=None):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be an (n, d) matrix")
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.rng_seed)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def _vector(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise KeyError(f"unknown object id {i}")
        return self.vectors[i]

    def sample(self, i: int, j: int, x_t) -> int:
        """Draw the answer to "which of (i, j) is closer to the target at x_t?"."""
        if i == j:
            raise ValueError("query objects must be distinct")
        h = bisect(self._vector(i), self._vector(j))
        p = answer_prob(h, as_point(x_t), self.config.sigma_eps)
        return i if self.rng.random() < p else j

    def sample_for_target(self, i: int, j: int, target_id: int) -> int:
        """Same as sample(), with the target given as a catalog id."""
        return self.sample(i, j, self._vector(target_id))


def sample_answer(i: int, j: int, x_t, vectors: np.ndarray, config: OracleConfig,
                  rng=None) -> int:
    """One-shot convenience wrapper around Oracle.sample."""
    return Oracle(vectors, config, rng=rng).sample(i, j, x_t)


def calibrate_sigma(vectors: np.ndarray, target_flip_rate: float,
                    n_triples: int = 100_000, seed: int = 0) -> float:
    """Noise level at which the expected flip rate equals the target.

    A "flip" is an answer that disagrees with the noiseless (closer-object)
    answer. The rate is averaged over uniformly random (i, j, t) triples
    with i != j and t uniform over all objects, using the closed-form flip
    probability 1 - Phi(|s| / sigma) per triple; sigma is found by
    bisection, which is valid because the rate is monotone in sigma.
    """
    if not 0.0 < target_flip_rate < 0.5:
        raise CalibrationError("target flip rate must be in (0, 0.5)")
    X = np.asarray(vectors, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two objects")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=n_triples)
    j = rng.integers(0, n, size=n_triples)
    redraw = i == j
    while np.any(redraw):
        j[redraw] = rng.integers(0, n, size=int(redraw.sum()))
        redraw = i == j
    t = rng.integers(0, n, size=n_triples)

    diff = X[i] - X[j]
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > 0  # coincident pairs carry no signal either way; drop them
    # |w.x_t + b| via the midpoint: s = (x_t - (x_i + x_j)/2) . w
    mid = 0.5 * (X[i] + X[j])
    s = np.abs(np.einsum("ij,ij->i", X[t] - mid, diff) / np.where(ok, dist, 1.0))
    s = s[ok]
    if s.size == 0:
        raise CalibrationError("all sampled pairs are coincident")

    def flip_rate(sigma: float) -> float:
        return float(np.mean(1.0 - ndtr(s / sigma)))

    lo, hi = 1e-9, 1.0
    while flip_rate(hi) < target_flip_rate:
        hi *= 2.0
        if hi > 1e9:
            raise CalibrationError(
                f"flip rate {target_flip_rate} unreachable (max "
                f"{flip_rate(1e9):.4f} at sigma = 1e9)")
    for _ in range(200):
        mid_sigma = 0.5 * (lo + hi)
        if flip_rate(mid_sigma) < target_flip_rate:
            lo = mid_sigma
        else:
            hi = mid_sigma
    return 0.5 * (lo + hi)


def measured_flip_rate(vectors: np.ndarray, sigma_eps: float,
                       n_triples: int = 100_000, seed: int = 1) -> float:
    """Empirical flip rate from actually sampled answers (for verification)."""
    X = np.asarray(vectors, dtype=np.float64)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=n_triples)
    j = rng.integers(0, n, size=n_triples)
    redraw = i == j
    while np.any(redraw):
        j[redraw] = rng.integers(0, n, size=int(redraw.sum()))
        redraw = i == j
    t = rng.integers(0, n, size=n_triples)
    diff = X[i] - X[j]
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > 0
    mid = 0.5 * (X[i] + X[j])
    s = np.einsum("ij,ij->i", X[t] - mid, diff)[ok] / dist[ok]
    if sigma_eps == 0.0:
        return 0.0
    p_pos = ndtr(s / sigma_eps)  # P(answer = i)
    u = rng.random(size=s.size)
    answered_i = u < p_pos
    noiseless_i = s > 0
    flips = answered_i != noiseless_i
    # targets exactly on the plane have no noiseless answer; count half
    on_plane = s == 0
    return float((flips & ~on_plane).mean() + 0.5 * on_plane.mean())
