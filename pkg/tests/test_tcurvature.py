import numpy as np
import pytest

from finslerlab.curvature import flag_curvature
from finslerlab.metrics import metric_from_name, sample_chart
from finslerlab.tcurvature import (
    measure_delta,
    stencil_flag_curvature,
    t_bound_bracket,
    t_bound_check,
    t_curvature,
    t_curvature_batch,
    transverse_part,
)


def _samples(m, n, rng, fraction=0.9):
    x = sample_chart(m.chart, m.dim, n, rng, fraction)
    return x, rng.normal(size=(n, m.dim)), rng.normal(size=(n, m.dim))


def test_riemannian_t_vanishes(rng):
    m = metric_from_name("hyperbolic:k=1")
    x, y, v = _samples(m, 50, rng)
    assert np.abs(t_curvature_batch(m, x, y, v)).max() < 1e-7


def test_minkowski_t_vanishes(rng):
    m = metric_from_name("minkowski-randers:b=0.3,0")
    x, y, v = _samples(m, 50, rng)
    assert np.abs(t_curvature_batch(m, x, y, v)).max() < 1e-8


def test_randers_shooting_matches_oracle(randers, rng):
    x, y, v = _samples(randers, 40, rng)
    shoot = t_curvature_batch(randers, x, y, v)
    exact = t_curvature_batch(randers, x, y, v, method="jet")
    coarse = t_curvature_batch(randers, x, y, v, h=2e-3)
    assert np.abs(exact).max() > 1e-3
    assert np.abs(shoot - exact).max() < 1e-8
    assert np.abs(shoot - coarse).max() < 1e-6


def test_t_homogeneity_and_pole(randers):
    x, y, v = np.array([0.2, -0.1]), np.array([0.4, 1.0]), np.array([1.0, 0.3])
    t1 = t_curvature(randers, x, y, v, method="jet").value
    assert t_curvature(randers, x, y, 2 * v, method="jet").value == pytest.approx(4 * t1, rel=1e-10)
    assert t_curvature(randers, x, 3 * y, v, method="jet").value == pytest.approx(t1, rel=1e-10)
    assert abs(t_curvature(randers, x, y, y).value) < 1e-7
    assert t_curvature(randers, x, y, np.zeros(2)).value == 0.0


def test_opposite_pole_breaks_the_bracket(randers):
    # for a non-reversible spray T_y(-y) != 0 although the bracket vanishes there
    x, y = np.array([[0.2, 0.3]]), np.array([[0.3, 1.0]])
    assert abs(t_curvature_batch(randers, x, y, -y, method="jet")[0]) > 1e-4
    assert abs(t_bound_bracket(randers, x, y / randers.F(x, y)[:, None], -y)[0]) < 1e-12


def test_bound_check(randers, rng):
    m = metric_from_name("hyperbolic:k=1")
    assert t_bound_check(m, _samples(m, 30, rng), 0.0, slack=1e-9).ok
    x, y, u = _samples(randers, 60, rng)
    u = transverse_part(randers, x, y, u)
    delta, T = measure_delta(randers, (x, y, u), method="jet")
    assert 0 < delta < 0.05
    res = t_bound_check(randers, (x, y, u), delta - 1e-4, method="jet", T=T)
    assert not res.ok and res.witness["T"] != 0.0
    assert t_bound_check(randers, (x, y, u), delta * 1.001, method="jet", T=T).ok
    with pytest.raises(ValueError):
        t_bound_check(randers, (x, y, u), -1.0)


def test_transverse_part_is_orthogonal(randers, rng):
    from finslerlab.curvature import metric_tensor

    x, y, u = _samples(randers, 10, rng)
    w = transverse_part(randers, x, y, u)
    g = metric_tensor(randers, x, y)
    assert np.abs(np.einsum("mi,mij,mj->m", w, g, y)).max() < 1e-12


def test_osculating_metric_reproduces_flag_curvature(randers, rng):
    x, y, u = _samples(randers, 10, rng, 0.6)
    K = flag_curvature(randers, x, y, u)
    Ks = stencil_flag_curvature(randers, x, y, u)
    assert np.abs(K - Ks).max() < 1e-5
