import numpy as np
import pytest

from conftest import normal_geodesic
from finslerlab.errors import HypothesisViolated, SpanMismatch
from finslerlab.geodesics import integrate_geodesic, parallel_frame
from finslerlab.hypersurface import make_sphere
from finslerlab.jacobi import (
    FrameField,
    comparison_check,
    focal_scan,
    index_form,
    integrate_jacobi,
    integrate_jacobi_frame,
    n_jacobi,
    source_gram,
    transplant,
)
from finslerlab.metrics import make_euclidean, make_hyperbolic

TS = np.linspace(0.0, 3.0, 61)


def test_point_jacobi_sinh():
    m = make_hyperbolic(2, 1.0)
    geo = integrate_geodesic(m, [0, 0], [0.5, 0], 3.0)
    J = integrate_jacobi(geo, np.zeros(2), np.array([0.0, 0.5]), grid=TS)
    assert np.abs(J.norm()[:, 0] - np.sinh(TS)).max() < 1e-7
    assert J.residual(TS[1:-1]).max() < 1e-5
    g, gd = J.chart_gram()
    assert np.allclose(g[:, 0, 0], np.sinh(TS) ** 2, rtol=1e-6, atol=1e-9)


def test_n_jacobi_euclidean_sphere():
    m = make_euclidean(2)
    geo = integrate_geodesic(m, [1.0, 0.0], [1.0, 0.0], 3.0)
    J = n_jacobi(geo, np.eye(2), np.array([0.0, 1.0]), grid=TS)
    assert np.abs(J.norm()[:, 0] - (1 + TS)).max() < 1e-8
    assert J.origin == "N-Jacobi"


def test_focal_scan_inward_sphere_2d_and_3d():
    for d in (2, 3):
        m = make_euclidean(d)
        frame = parallel_frame(m, (np.eye(d)[0], -np.eye(d)[0], 2.0))
        rep = focal_scan(frame, -np.eye(d - 1))
        assert len(rep.focal_times) == 1
        assert rep.focal_times[0] == pytest.approx(1.0, abs=1e-9)
        assert rep.none_found_up_to == pytest.approx(1.0, abs=1e-9)


def test_no_focal_point_outward_hyperbolic():
    m = make_hyperbolic(2, 1.0)
    frame = parallel_frame(m, (np.zeros(2), np.array([0.5, 0.0]), 4.0))
    rep = focal_scan(frame, [[1.0 / np.tanh(1.0)]])
    assert rep.focal_times == [] and rep.none_found_up_to == 4.0


def test_index_form_endpoint_identity(randers):
    s = make_sphere(randers, 0.5, 8)
    frame, S = normal_geodesic(s, 3, 2.0)
    phi0 = np.array([1.0, 0.0])
    J = integrate_jacobi_frame(frame, phi0, np.array([S[0, 0], 0.0]), origin="N-Jacobi", shape_operator=S)
    f = J.field(0)
    for t in (0.5, 1.0, 2.0):
        val = index_form(S, frame, f, f, t)
        p, dp = J.at(t)
        assert val.value == pytest.approx(float(p[:, 0] @ dp[:, 0]), abs=1e-8)


def test_index_lemma_random_fields(rng):
    m = make_hyperbolic(2, 1.0)
    s = make_sphere(m, 0.5, 4)
    frame, S = normal_geodesic(s, 0, 2.0)
    J = integrate_jacobi_frame(frame, np.array([1.0, 0.0]), np.array([S[0, 0], 0.0]))
    f = J.field(0)
    t = 1.5
    IJ = index_form(S, frame, f, f, t).value
    for _ in range(10):
        c = rng.normal(size=(4, 2))
        c[0, 1] = 0.0  # stays tangent to the surface at t = 0
        Y = f + FrameField.polynomial_bump(c, t)
        assert IJ <= index_form(S, frame, Y, Y, t).value + 1e-9


def test_transplant_preserves_norms():
    hyp = make_hyperbolic(2, 1.0)
    euc = make_euclidean(2)
    fa = parallel_frame(hyp, (np.zeros(2), np.array([0.5, 0.0]), 2.0))
    fb = parallel_frame(euc, (np.zeros(2), np.array([0.0, 1.0]), 2.0))
    J = integrate_jacobi_frame(fa, np.zeros(2), np.array([1.0, 0.0]), grid=np.linspace(0, 2, 21))
    Jb = transplant(J, fb)
    src, dst = source_gram(J), Jb.chart_gram()
    for key in ("norm2", "dnorm2", "velocity"):
        assert np.allclose(src[key], dst[key], atol=1e-8)
    short = parallel_frame(euc, (np.zeros(2), np.array([0.0, 1.0]), 1.0))
    with pytest.raises(SpanMismatch):
        transplant(J, short)


def test_comparison_exponential_vs_linear():
    hyp = make_hyperbolic(2, 1.0)
    euc = make_euclidean(2)
    fa = parallel_frame(hyp, (np.zeros(2), np.array([0.5, 0.0]), 3.0))
    fb = parallel_frame(euc, (np.zeros(2), np.array([1.0, 0.0]), 3.0))
    rep = comparison_check(fa, [1.0], fb, [1.0], grid=TS)
    assert rep.holds and rep.min_margin >= 0
    assert np.abs(rep.norm[:, 0] - np.exp(TS)).max() < 1e-6
    assert np.abs(rep.norm_bar[:, 0] - (1 + TS)).max() < 1e-8
    with pytest.raises(HypothesisViolated):
        comparison_check(fb, [1.0], fa, [1.0], grid=TS)
    with pytest.raises(HypothesisViolated):
        comparison_check(fa, [0.5], fb, [1.0], grid=TS)
