"""Gaussian posterior over the target location and its moment-matched update.

The belief is N(mu, Sigma). After observing a comparison outcome for a
hyperplane h = (w, b), the exact posterior is the Gaussian tilted by a
probit factor Phi((w.x + b) / sigma_eps); it is projected back to a
Gaussian by matching the first two moments (single-pass assumed density
filtering). Because the tilt depends on x only through w.x, the update
is rank-one:

    mu'    = mu + alpha * Sigma w
    Sigma' = Sigma + beta * (Sigma w)(Sigma w)^T

with alpha, beta the first two derivatives of log Phi(z), evaluated at
z = (w.mu + b) / sqrt(w.Sigma.w + sigma_eps^2), taken with respect to
the projected mean w.mu. Equivalently Sigma' = (Sigma^-1 + tau w w^T)^-1
with tau = -beta / (1 + beta w.Sigma.w) > 0, so every update strictly
increases precision along w and leaves the orthogonal complement alone.
The rank-one form keeps the per-update cost at O(d^2).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr

from .constants import (
    DENSE_EIG_MAX_DIM,
    EIGEN_FLOOR,
    GEOM_ATOL,
    POWER_MAX_ITER,
    POWER_TOL,
)
from .exceptions import CovarianceError
from .geometry import Hyperplane, as_point

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class GaussianBelief:
    """Immutable N(mu, Sigma) value; updates return new instances."""

    __slots__ = ("mu", "sigma", "_chol")

    def __init__(self, mu, sigma, validate: bool = True):
        mu = np.array(mu, dtype=np.float64)
        sigma = np.array(sigma, dtype=np.float64)
        if validate:
            if mu.ndim != 1:
                raise ValueError("mu must be a vector")
            if sigma.shape != (mu.size, mu.size):
                raise ValueError("sigma shape must match mu")
            if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
                raise ValueError("belief has non-finite entries")
            if np.max(np.abs(sigma - sigma.T)) > GEOM_ATOL:
                raise ValueError("sigma must be symmetric")
            if float(np.linalg.eigvalsh(sigma)[0]) < EIGEN_FLOOR:
                raise CovarianceError(
                    f"sigma smallest eigenvalue below floor {EIGEN_FLOOR}")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        self.mu = mu
        self.sigma = sigma
        self._chol = None

    @property
    def dim(self) -> int:
        return self.mu.size

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor; repairs (with a logged warning) if needed."""
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.sigma)
            except np.linalg.LinAlgError:
                repaired = floor_eigenvalues(self.sigma, EIGEN_FLOOR)
                try:
                    self._chol = np.linalg.cholesky(repaired)
                except np.linalg.LinAlgError as exc:
                    raise CovarianceError(
                        "covariance not repairable by eigenvalue floor") from exc
                repaired.setflags(write=False)
                self.sigma = repaired
        return self._chol

    def sample(self, rng) -> np.ndarray:
        """One draw from N(mu, Sigma)."""
        return self.mu + self.cholesky() @ rng.standard_normal(self.dim)

    def __repr__(self):
        return f"GaussianBelief(dim={self.dim}, tr={float(np.trace(self.sigma)):.4g})"


def floor_eigenvalues(sigma: np.ndarray, floor: float) -> np.ndarray:
    """Clip eigenvalues up to `floor`, logging the repair."""
    vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if vals[0] >= floor:
        return 0.5 * (sigma + sigma.T)
    logger.warning("covariance eigenvalue %.3e below floor %.1e; repairing",
                   vals[0], floor)
    vals = np.clip(vals, floor, None)
    return (vecs * vals) @ vecs.T


@dataclass(frozen=True)
class AdfIntermediates:
    """Scalars of one moment-matching step.

    alpha, beta: first/second derivative of the log marginal likelihood
    log Phi((w.mu + b) / sqrt(w.Sigma.w + sigma_eps^2)) in the projected
    mean. beta < 0 always (the probit factor is log-concave), hence the
    precision increment tau > 0.
    """

    alpha: float
    beta: float
    tau: float
    nu: float


def _probit_derivatives(m: float, v: float, sigma_eps: float):
    """(alpha, beta) for tilt Phi((s + b-part folded into m) / sigma_eps).

    m is the mean of the projected coordinate plus offset, v its variance.
    Uses log Phi from scipy (stable for arguments down to ~-1e9), so both
    values are finite for |z| well beyond 37.
    """
    denom2 = v + sigma_eps * sigma_eps
    denom = math.sqrt(denom2)
    z = m / denom
    # r = phi(z) / Phi(z), computed in log space to survive z << 0
    log_r = -0.5 * z * z - _LOG_SQRT_2PI - float(log_ndtr(z))
    r = math.exp(log_r)
    alpha = r / denom
    beta = -r * (z + r) / denom2
    return alpha, beta, z


def adf_intermediates(belief: GaussianBelief, h: Hyperplane,
                      sigma_eps: float) -> AdfIntermediates:
    """Update scalars for outcome +1 on hyperplane h."""
    w = h.w
    v = float(w @ belief.sigma @ w)
    m = float(w @ belief.mu) + h.b
    alpha, beta, _ = _probit_derivatives(m, v, sigma_eps)
    damp = 1.0 + beta * v
    if damp <= 0.0:
        raise CovarianceError("probit curvature exceeded prior variance budget")
    tau = -beta / damp
    nu = (alpha - beta * m) / damp
    return AdfIntermediates(alpha=alpha, beta=beta, tau=tau, nu=nu)


def adf_update(belief: GaussianBelief, h: Hyperplane, outcome: int,
               sigma_eps: float) -> GaussianBelief:
    """Moment-matched posterior after observing `outcome` on hyperplane h.

    outcome +1 means the answer favored the positive side of h; -1 flips
    the hyperplane first (the probit model is symmetric under negation).
    """
    if outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    if outcome == -1:
        h = h.flip()
    w = h.w
    sw = belief.sigma @ w
    v = float(w @ sw)
    m = float(w @ belief.mu) + h.b
    alpha, beta, _ = _probit_derivatives(m, v, sigma_eps)
    if 1.0 + beta * v <= 0.0:
        raise CovarianceError("rank-one update would destroy positive definiteness")
    sigma_new = belief.sigma + beta * np.outer(sw, sw)
    sigma_new = 0.5 * (sigma_new + sigma_new.T)
    mu_new = belief.mu + alpha * sw
    if np.min(np.diagonal(sigma_new)) <= 0.0:
        # mathematically impossible; only reachable through severe roundoff
        sigma_new = floor_eigenvalues(sigma_new, EIGEN_FLOOR)
    return GaussianBelief(mu_new, sigma_new, validate=False)


def top_direction(sigma: np.ndarray, warm_start=None) -> np.ndarray:
    """Unit vector (approximately) maximizing w' Sigma w.

    Dense symmetric eigendecomposition for d <= 32; power iteration above
    (warm-started when a previous direction is supplied, e1 otherwise).
    Ties are broken canonically: project the standard basis vectors onto
    the dominant eigenspace and take the first with nonzero projection,
    then fix the sign so the first nonzero entry is positive.
    """
    s = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("covariance has non-finite entries")
    d = s.shape[0]
    if d <= DENSE_EIG_MAX_DIM:
        vals, vecs = np.linalg.eigh(s)
        lam = float(vals[-1])
        dominant = vals >= lam * (1.0 - GEOM_ATOL)
        if int(dominant.sum()) == 1:
            w = vecs[:, -1]
        else:
            basis = vecs[:, dominant]  # orthonormal
            w = None
            for k in range(d):
                proj = basis @ basis[k, :]
                nrm = float(np.linalg.norm(proj))
                if nrm > 1e-8:
                    w = proj / nrm
                    break
            if w is None:  # cannot happen for an orthonormal basis
                w = vecs[:, -1]
    else:
        w = _power_iteration(s, warm_start)
    return _fix_sign(w)


def _power_iteration(s: np.ndarray, warm_start=None) -> np.ndarray:
    d = s.shape[0]
    if warm_start is not None:
        x = as_point(warm_start).copy()
        nrm = float(np.linalg.norm(x))
        x = x / nrm if nrm > 0 else None
    else:
        x = None
    if x is None:
        x = np.zeros(d)
        x[0] = 1.0
    for _ in range(POWER_MAX_ITER):
        y = s @ x
        nrm = float(np.linalg.norm(y))
        if nrm == 0.0:  # x in the nullspace; restart from e1
            x = np.zeros(d)
            x[0] = 1.0
            continue
        y /= nrm
        if min(float(np.linalg.norm(y - x)), float(np.linalg.norm(y + x))) < POWER_TOL:
            return y
        x = y
    return x


def _fix_sign(w: np.ndarray) -> np.ndarray:
    for entry in w:
        if abs(entry) > 1e-12:
            return w if entry > 0 else -w
    return w


def optimal_hyperplane(belief: GaussianBelief, warm_start=None) -> Hyperplane:
    """Most informative query hyperplane: normal along the top-variance
    direction, passing through the belief mean (w.mu + b = 0)."""
    w = top_direction(belief.sigma, warm_start=warm_start)
    return Hyperplane(w, -float(w @ belief.mu))


def density_score(belief: GaussianBelief, x) -> float:
    """Log density of the belief at x (enough for argmax-style stop rules)."""
    p = as_point(x)
    return float(density_scores(belief, p[None, :])[0])


def density_scores(belief: GaussianBelief, xs: np.ndarray) -> np.ndarray:
    """Vectorized log N(x; mu, Sigma) over the rows of xs."""
    xs = np.asarray(xs, dtype=np.float64)
    chol = belief.cholesky()
    diff = xs - belief.mu
    z = solve_triangular(chol, diff.T, lower=True)
    quad = np.sum(z * z, axis=0)
    log_det = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    return -0.5 * (quad + log_det + belief.dim * math.log(2.0 * math.pi))
