import numpy as np
import pytest

from finslerlab.core import Flag, Point, TangentVector
from finslerlab.curvature import (
    chern_derivative,
    connection,
    curvature_matrix,
    flag_curvature,
    g_orthonormal_frame,
    geodesic_coefficients,
    metric_tensor,
)
from finslerlab.errors import DegenerateFlag, ZeroVector
from finslerlab.metrics import metric_from_name, sample_chart


def test_spray_homogeneity(randers, rng):
    x = sample_chart(randers.chart, 2, 20, rng)
    y = rng.normal(size=(20, 2))
    G1 = geodesic_coefficients(randers, x, y)
    G2 = geodesic_coefficients(randers, x, 2.5 * y)
    assert np.allclose(G2, 6.25 * G1, rtol=1e-12, atol=1e-14)
    G, N = connection(randers, x, y)
    # Euler: N y = 2 G
    assert np.allclose(np.einsum("...ij,...j->...i", N, y), 2 * G, atol=1e-12)


def test_curvature_matrix_annihilates_pole(randers, rng):
    x = sample_chart(randers.chart, 2, 20, rng)
    y = rng.normal(size=(20, 2))
    R = curvature_matrix(randers, x, y)
    assert np.abs(np.einsum("...ij,...j->...i", R, y)).max() < 1e-9
    # g_y-self-adjoint
    g = metric_tensor(randers, x, y)
    gR = g @ R
    assert np.abs(gR - np.swapaxes(gR, -1, -2)).max() < 1e-9


def test_flag_curvature_hyperbolic_3d(rng):
    m = metric_from_name("hyperbolic:k=2,dim=3")
    x = sample_chart(m.chart, 3, 50, rng)
    K = flag_curvature(m, x, rng.normal(size=(50, 3)), rng.normal(size=(50, 3)))
    assert np.abs(K + 4).max() < 1e-6


def test_flag_curvature_independent_of_transverse_scaling(randers):
    x, y, u = np.array([0.2, 0.3]), np.array([1.0, 0.4]), np.array([-0.3, 1.0])
    K = flag_curvature(randers, x, y, u)
    assert flag_curvature(randers, x, y, 3 * u + 2 * y) == pytest.approx(K, rel=1e-10)
    assert -1.1 < K < -0.9


def test_flag_object_and_errors(randers):
    p = Point(np.array([0.1, 0.1]))
    flag = Flag(p, TangentVector(p, np.array([1.0, 0.0])), TangentVector(p, np.array([0.0, 1.0])))
    assert flag_curvature(randers, flag) == pytest.approx(flag_curvature(randers, [0.1, 0.1], [1, 0], [0, 1]))
    with pytest.raises(DegenerateFlag):
        flag_curvature(randers, [0.1, 0.1], [1, 0], [2, 0])
    with pytest.raises(ZeroVector):
        chern_derivative(randers, np.zeros((1, 2)), np.ones((1, 2)), np.ones((1, 2)), np.zeros((1, 2)))


def test_g_orthonormal_frame(randers):
    g = metric_tensor(randers, np.array([0.2, 0.1]), np.array([0.3, 1.0]))
    E = g_orthonormal_frame(g, np.array([0.3, 1.0]))
    assert np.allclose(E.T @ g @ E, np.eye(2), atol=1e-12)
    assert abs(E[0, -1] * 1.0 - E[1, -1] * 0.3) < 1e-12
