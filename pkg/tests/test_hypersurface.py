import numpy as np
import pytest

from finslerlab.curvature import metric_tensor
from finslerlab.errors import EvaluationOutsideDomain
from finslerlab.hypersurface import (
    ImmersedHypersurface,
    detect_focal,
    make_ellipsoid,
    make_plane,
    make_sphere,
    normal_curvature,
    normal_vector,
    shape_operator,
    surface_from_name,
)
from finslerlab.metrics import make_euclidean, make_hyperbolic, make_minkowski_randers
from finslerlab.tcurvature import t_curvature_batch


def test_euclidean_sphere():
    s = make_sphere(make_euclidean(2), 0.5, 8)
    w = np.ones((8, 1))
    assert np.allclose(normal_curvature(s, s.samples, w), 2.0, atol=1e-10)
    S = shape_operator(s)
    assert np.allclose(S.eigenvalues(), 2.0, atol=1e-8)
    assert np.allclose(normal_curvature(s.reversed(), s.samples, w), -2.0, atol=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_hyperbolic_sphere_coth(dim):
    s = make_sphere(make_hyperbolic(dim, 1.0), 0.7, 8)
    S = shape_operator(s)
    assert np.abs(S.eigenvalues() - 1 / np.tanh(0.7)).max() < 1e-8
    assert S.self_adjoint_residual().max() < 1e-8


def test_ellipsoid_principal_curvatures():
    s = make_ellipsoid(make_euclidean(2), 1.0, 0.5, n=16)
    u = np.array([[0.0], [np.pi / 2]])
    # at the end of the long axis k = a / b^2, at the end of the short one b / a^2
    assert normal_curvature(s, u, np.ones((2, 1))) == pytest.approx([4.0, 0.5], abs=1e-10)


def test_minkowski_plane_normal_not_symmetric():
    m = make_minkowski_randers(2, (0.3, 0.0))
    p = make_plane(m, [0.0, 1.0], n=3)
    n_up = normal_vector(p).normal[0]
    n_down = normal_vector(p, sign=-1).normal[0]
    r = 1 / 0.91
    assert n_up == pytest.approx([-0.3 * r, np.sqrt(r * r - (0.3 * r) ** 2)], abs=1e-9)
    assert n_down == pytest.approx([-0.3 * r, -np.sqrt(r * r - (0.3 * r) ** 2)], abs=1e-9)
    assert not np.allclose(n_down, -n_up)


def test_normals_are_unit_and_orthogonal(randers3):
    s = make_sphere(randers3, 0.6, 12)
    nd = normal_vector(s)
    g = metric_tensor(randers3, nd.foot, nd.normal)
    assert np.abs(randers3.F(nd.foot, nd.normal) - 1).max() < 1e-12
    assert np.abs(np.einsum("mia,mij,mj->ma", nd.tangents, g, nd.normal)).max() < 1e-10


def test_osculating_identity(randers):
    s = surface_from_name(randers, "perturbed-sphere:r=0.8,amp=0.05,mode=3", n=12)
    u, w = s.samples, np.ones((12, 1))
    S = shape_operator(s, u)
    nd = S.normals
    y = nd.tangents[..., 0]
    g = metric_tensor(randers, nd.foot, nd.normal)
    gyy = np.einsum("mi,mij,mj->m", y, g, y)
    T = t_curvature_batch(randers, nd.foot, nd.normal, y, method="jet")
    kn = normal_curvature(s, u, w, normals=nd)
    assert np.abs(kn - (S.osculating_curvature(w) - T / gyy)).max() < 1e-8


def test_detect_focal_inward_sphere():
    s = make_sphere(make_euclidean(2), 1.0, 4, outward=False)
    rep = detect_focal(s, s.samples[0], T_max=1.5)
    assert rep.focal_times[0] == pytest.approx(1.0, abs=1e-6)


def test_degenerate_and_outside_rejected():
    m = make_euclidean(2)
    s = make_sphere(m, 1.0, 4)
    with pytest.raises(ValueError):
        ImmersedHypersurface(m, s.point, lambda u: 0 * s.jacobian(u), s.hessian, s.orientation, s.samples)
    with pytest.raises(EvaluationOutsideDomain):
        make_sphere(make_hyperbolic(2), 8.0, 4)
    with pytest.raises(ValueError):
        surface_from_name(m, "torus:r=1")
