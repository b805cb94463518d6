import numpy as np
import pytest

from pairsearch.exceptions import CoincidentPointsError, DimensionMismatchError
from pairsearch.geometry import Hyperplane, bisect, reflect, signed_distance


def test_bisect_symmetric_pair():
    h = bisect([1.0, 0.0], [-1.0, 0.0])
    np.testing.assert_allclose(h.w, [1.0, 0.0])
    assert h.b == pytest.approx(0.0)


def test_bisect_offset_pair():
    # x_i=(2,0), x_j=(0,0): plane x=1, b = (0-4)/(2*2) = -1
    h = bisect([2.0, 0.0], [0.0, 0.0])
    np.testing.assert_allclose(h.w, [1.0, 0.0])
    assert h.b == pytest.approx(-1.0)


def test_bisect_midpoint_on_plane_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        xi = rng.uniform(-5, 5, 5)
        xj = rng.uniform(-5, 5, 5)
        h = bisect(xi, xj)
        mid = 0.5 * (xi + xj)
        assert abs(signed_distance(h, mid)) < 1e-9
        # endpoints sit at opposite signed distances
        assert signed_distance(h, xi) == pytest.approx(-signed_distance(h, xj), abs=1e-9)


def test_bisect_antisymmetric():
    rng = np.random.default_rng(1)
    for _ in range(50):
        xi = rng.uniform(-3, 3, 4)
        xj = rng.uniform(-3, 3, 4)
        h_ij = bisect(xi, xj)
        h_ji = bisect(xj, xi)
        np.testing.assert_allclose(h_ji.w, -h_ij.w, atol=1e-9)
        assert h_ji.b == pytest.approx(-h_ij.b, abs=1e-9)


def test_closer_point_is_on_positive_side():
    rng = np.random.default_rng(2)
    for _ in range(200):
        xi = rng.uniform(-2, 2, 3)
        xj = rng.uniform(-2, 2, 3)
        x = rng.uniform(-2, 2, 3)
        if np.linalg.norm(xi - x) < np.linalg.norm(xj - x):
            assert signed_distance(bisect(xi, xj), x) > 0


def test_bisect_coincident_points_rejected():
    with pytest.raises(CoincidentPointsError):
        bisect([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(CoincidentPointsError):
        bisect([1.0, 2.0], [1.0, 2.0 + 1e-13])


def test_signed_distance_examples():
    assert signed_distance(Hyperplane([1.0, 0.0], -1.0), [1.0, 5.0]) == pytest.approx(0.0)
    assert signed_distance(Hyperplane([1.0, 0.0], 0.0), [3.0, 0.0]) == pytest.approx(3.0)
    assert signed_distance(Hyperplane([0.0, 1.0], 2.0), [7.0, -2.0]) == pytest.approx(0.0)


def test_signed_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        signed_distance(Hyperplane([1.0, 0.0], 0.0), [1.0, 2.0, 3.0])


def test_reflect_fixed_point_on_plane():
    h = Hyperplane([0.6, 0.8], -1.0)
    z = np.array([1.0, (1.0 - 0.6) / 0.8])  # on the plane
    np.testing.assert_allclose(reflect(z, h), z, atol=1e-12)


def test_reflect_example():
    np.testing.assert_allclose(reflect([2.0, 0.0], Hyperplane([1.0, 0.0], 0.0)),
                               [-2.0, 0.0])


def test_reflect_involution_and_distance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        z = rng.uniform(-4, 4, 4)
        w = rng.standard_normal(4)
        w /= np.linalg.norm(w)
        h = Hyperplane(w, float(rng.uniform(-2, 2)))
        z2 = reflect(z, h)
        np.testing.assert_allclose(reflect(z2, h), z, atol=1e-9)
        assert signed_distance(h, z2) == pytest.approx(-signed_distance(h, z), abs=1e-9)
        mid = 0.5 * (z + z2)
        assert abs(signed_distance(h, mid)) < 1e-9


def test_hyperplane_requires_unit_normal():
    with pytest.raises(ValueError):
        Hyperplane([1.0, 1.0], 0.0)


def test_point_validation():
    with pytest.raises(ValueError):
        bisect([np.nan, 0.0], [0.0, 0.0])
