"""Vector and hyperplane primitives shared by every other module.

A comparison query between two objects is decided by the hyperplane of
points equidistant from both; all answer models and belief updates are
expressed through that hyperplane. Everything here is a pure function
over immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import COINCIDENT_TOL, GEOM_ATOL
from .exceptions import CoincidentPointsError, DimensionMismatchError


def as_point(x) -> np.ndarray:
    """Validate and return a feature vector as a float64 array."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite entries")
    return p


@dataclass(frozen=True)
class Hyperplane:
    """Oriented hyperplane {x : w.x + b = 0} with unit normal w."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = as_point(self.w)
        nrm = float(np.linalg.norm(w))
        if abs(nrm - 1.0) > GEOM_ATOL:
            raise ValueError(f"normal must be a unit vector, got |w| = {nrm}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.w.size

    def flip(self) -> "Hyperplane":
        """Same plane with reversed orientation."""
        return Hyperplane(-self.w, -self.b)


def bisect(x_i, x_j) -> Hyperplane:
    """Bisecting hyperplane between two points, normal pointing toward x_i.

    w = (x_i - x_j) / |x_i - x_j|, b = (|x_j|^2 - |x_i|^2) / (2 |x_i - x_j|),
    so points strictly closer to x_i have positive signed distance.
    """
    xi = as_point(x_i)
    xj = as_point(x_j)
    if xi.size != xj.size:
        raise DimensionMismatchError(f"dim {xi.size} vs {xj.size}")
    diff = xi - xj
    dist = float(np.linalg.norm(diff))
    if dist <= COINCIDENT_TOL:
        raise CoincidentPointsError(f"points coincide within {COINCIDENT_TOL}")
    w = diff / dist
    b = float(np.dot(xj, xj) - np.dot(xi, xi)) / (2.0 * dist)
    return Hyperplane(w, b)


def signed_distance(h: Hyperplane, x) -> float:
    """w.x + b: positive on the side the normal points to, zero on the plane."""
    p = as_point(x)
    if p.size != h.dim:
        raise DimensionMismatchError(f"dim {p.size} vs hyperplane dim {h.dim}")
    return float(np.dot(h.w, p) + h.b)


def reflect(z, h: Hyperplane) -> np.ndarray:
    """Mirror image of z across h: z - 2 (w.z + b) w."""
    p = as_point(z)
    if p.size != h.dim:
        raise DimensionMismatchError(f"dim {p.size} vs hyperplane dim {h.dim}")
    return p - 2.0 * (float(np.dot(h.w, p)) + h.b) * h.w
