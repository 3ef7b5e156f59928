"""Acceptance criteria, one test (and one printed PASS/FAIL line) per criterion.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py`` for the bare report.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, normal_geodesic  # noqa: E402
from finslerlab.cli import main as cli_main  # noqa: E402
from finslerlab.curvature import flag_curvature, metric_tensor  # noqa: E402
from finslerlab.errors import BlowUp  # noqa: E402
from finslerlab.flow import EquidistantFlow, flow_certificate, theorem3_verify  # noqa: E402
from finslerlab.geodesics import integrate_geodesic, parallel_frame  # noqa: E402
from finslerlab.hypersurface import (  # noqa: E402
    detect_focal,
    make_sphere,
    normal_curvature,
    shape_operator,
)
from finslerlab.jacobi import (  # noqa: E402
    FrameField,
    comparison_check,
    index_form,
    integrate_jacobi,
    integrate_jacobi_frame,
    n_jacobi,
)
from finslerlab.metrics import make_euclidean, make_hyperbolic, metric_from_name, sample_chart  # noqa: E402
from finslerlab.riccati import lemma2_check, random_certified_f, riccati_evolve  # noqa: E402
from finslerlab.tcurvature import t_curvature_batch  # noqa: E402


def report(number, title, passed, detail):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def test_c01_space_form_curvature():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    errs = {}
    for k in (1.0, 2.0):
        m = make_hyperbolic(2, k)
        x = sample_chart(m.chart, 2, 100, rng)
        K = flag_curvature(m, x, rng.normal(size=(100, 2)), rng.normal(size=(100, 2)))
        errs[k] = float(np.abs(K + k * k).max())
    m = make_euclidean(2)
    x = sample_chart(m.chart, 2, 100, rng)
    e0 = float(np.abs(flag_curvature(m, x, rng.normal(size=(100, 2)), rng.normal(size=(100, 2)))).max())
    dt = time.perf_counter() - t0
    ok = errs[1.0] < 1e-6 and errs[2.0] < 1e-6 and e0 < 1e-9 and dt < 10
    report(1, "space-form flag curvature", ok,
           f"|K+1|={errs[1.0]:.1e}, |K+4|={errs[2.0]:.1e}, euclidean |K|={e0:.1e}, {dt:.1f}s (<10s)")


def test_c02_berwald_t_vanishing():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = {}
    for name in ("euclidean", "hyperbolic:k=1", "minkowski-randers:b=0.3,0"):
        m = metric_from_name(name)
        x = sample_chart(m.chart, m.dim, 200, rng)
        T = t_curvature_batch(m, x, rng.normal(size=(200, 2)), rng.normal(size=(200, 2)))
        worst[name] = float(np.abs(T).max())
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-6 and dt < 60
    report(2, "T vanishes for Berwald metrics (shooting)", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {dt:.1f}s (<60s)")


def test_c03_jacobi_closed_forms():
    ts = np.linspace(0.0, 3.0, 301)
    hyp = make_hyperbolic(2, 1.0)
    geo = integrate_geodesic(hyp, [0.0, 0.0], [0.5, 0.0], 3.0)
    J = integrate_jacobi(geo, np.zeros(2), np.array([0.0, 0.5]), grid=ts)
    e1 = float(np.abs(J.norm()[:, 0] - np.sinh(ts)).max())
    sphere = make_sphere(make_euclidean(2), 1.0, 4)
    S = shape_operator(sphere, sphere.samples[:1])
    nd = S.normals
    geo = integrate_geodesic(sphere.metric, nd.foot[0], nd.normal[0], 3.0)
    J0 = nd.tangents[0][:, 0] / np.linalg.norm(nd.tangents[0][:, 0])
    Jn = n_jacobi(geo, S.chart_matrix[0], J0, grid=ts)
    e2 = float(np.abs(Jn.norm()[:, 0] - (1 + ts)).max())
    report(3, "Jacobi closed forms", e1 < 1e-5 and e2 < 1e-5,
           f"|J|-sinh t {e1:.1e}, |J|-(1+t) {e2:.1e} (tol 1e-5)")


def test_c04_focal_anchor():
    sphere = make_sphere(make_euclidean(2), 1.0, 4, outward=False)
    rep = detect_focal(sphere, sphere.samples[0], T_max=2.0)
    t_focal = rep.focal_times[0]
    with pytest.raises(BlowUp) as err:
        riccati_evolve(normal_curvature(sphere, sphere.samples[:1], np.ones((1, 1)))[0], lambda t: 0.0, 2.0)
    t_blow = err.value.time
    ok = abs(t_focal - 1.0) < 1e-6 and abs(t_focal - t_blow) < 1e-6
    report(4, "focal anchor", ok, f"focal {t_focal:.9f}, Riccati blow-up {t_blow:.9f} (tol 1e-6)")


def _index_scenario(surface, T, s, rng, n=100):
    frame, S = normal_geodesic(surface, 0, T)
    d = surface.metric.dim
    phi0 = np.zeros(d)
    phi0[0] = 1.0
    dphi0 = np.zeros(d)
    dphi0[: d - 1] = S[:, 0]
    J = integrate_jacobi_frame(frame, phi0, dphi0, origin="N-Jacobi", shape_operator=S)
    f = J.field(0)
    IJ = index_form(S, frame, f, f, s).value
    p, dp = J.at(s)
    endpoint = abs(IJ - float(p[:, 0] @ dp[:, 0]))
    worst = -np.inf
    for _ in range(n):
        c = rng.normal(size=(4, d))
        c[0, -1] = 0.0  # Y(0) stays tangent to N
        Y = f + FrameField.polynomial_bump(c, s)
        worst = max(worst, IJ - index_form(S, frame, Y, Y, s).value)
    return worst, endpoint


def test_c05_index_lemma():
    rng = np.random.default_rng(5)
    scenarios = {
        "hyperbolic 2D sphere": (make_sphere(make_hyperbolic(2, 1.0), 0.5, 4), 2.0, 1.5),
        "euclidean 3D sphere": (make_sphere(make_euclidean(3), 1.0, 4), 2.0, 2.0),
        "hyperbolic-Randers sphere": (make_sphere(metric_from_name("hyperbolic-randers:k=1,eps=0.05"), 0.5, 4),
                                      2.0, 1.5),
    }
    worst, endpoint = -np.inf, 0.0
    for surface, T, s in scenarios.values():
        w, e = _index_scenario(surface, T, s, rng)
        worst, endpoint = max(worst, w), max(endpoint, e)
    ok = worst <= 1e-9 and endpoint < 1e-6
    report(5, "index lemma", ok, f"3x100 fields, max I(J,J)-I(Y,Y) {worst:.1e} (<=1e-9), "
                                 f"endpoint identity {endpoint:.1e} (<1e-6)")


def test_c06_comparison_harness():
    ts = np.linspace(0.0, 3.0, 301)
    hyp, euc = make_hyperbolic(2, 1.0), make_euclidean(2)
    fa = parallel_frame(hyp, (np.zeros(2), np.array([0.5, 0.0]), 3.0))
    fb = parallel_frame(euc, (np.zeros(2), np.array([1.0, 0.0]), 3.0))
    r1 = comparison_check(fa, [1.0], fb, [1.0], grid=ts)
    closed = max(float(np.abs(r1.norm[:, 0] - np.exp(ts)).max()), float(np.abs(r1.norm_bar[:, 0] - 1 - ts).max()))
    randers = metric_from_name("hyperbolic-randers:k=1,eps=0.05")
    surface = make_sphere(randers, 0.5, 8)
    frame, S = normal_geodesic(surface, 2, 3.0)
    lam = np.linalg.eigvalsh(0.5 * (S + S.T))
    bar = make_hyperbolic(2, 0.9)
    fbar = parallel_frame(bar, (np.zeros(2), np.array([1.0, 0.0]) / bar.F(np.zeros(2), np.array([1.0, 0.0])), 3.0))
    r2 = comparison_check(frame, lam, fbar, [lam.min()], grid=ts)
    ok = r1.holds and r1.min_margin >= 0 and closed < 1e-5 and r2.holds and r2.min_margin >= 0
    report(6, "comparison harness", ok,
           f"e^t vs 1+t margin {r1.min_margin:.2e} (closed forms {closed:.1e}); "
           f"Randers vs hyperbolic(0.9) margin {r2.min_margin:.2e}")


def test_c07_lemma2_suite():
    rng = np.random.default_rng(7)
    violations, uncertified = 0, 0
    for lam in (0.0, 0.5, 1.0):
        for _ in range(50):
            f, fp = random_certified_f(lam, 5.0, rng)
            v = lemma2_check(lam, f, 5.0, fprime=fp)
            uncertified += not v.precondition_ok
            violations += v.precondition_ok and not v.holds
    report(7, "Lemma 2 property suite", violations == 0 and uncertified == 0,
           f"150 certified inputs, {violations} violations, {uncertified} rejected")


def test_c08_theorem3_pipeline():
    t0 = time.perf_counter()
    metric = metric_from_name("hyperbolic-randers:k=1,eps=0.05")
    surface = make_sphere(metric, 0.5, 64)
    flow = EquidistantFlow(surface, 3.0)
    rng = np.random.default_rng(8)
    k, delta, info = flow_certificate(flow, n=400, rng=rng)
    rep = theorem3_verify(surface, k, delta, 3.0, n_times=31, rng=rng, t_samples=200, flow=flow)
    dt = time.perf_counter() - t0
    convex = all(r.verdict == "locally-convex" for r in rep.reports)
    gap = max(r.riccati_gap for r in rep.reports)
    ok = delta < k and rep.hypotheses["base_min_kn"] > 2 * delta and convex and rep.passed and gap < 1e-3 and dt < 300
    report(8, "convexity of equidistant hypersurfaces", ok,
           f"k={k:.4f}, delta={delta:.4f} (measured {info['delta_hat']:.4f}), min k_n(N)="
           f"{rep.hypotheses['base_min_kn']:.3f}, {len(rep.reports)} times all locally-convex={convex}, "
           f"Riccati gap {gap:.1e} (<1e-3), {dt:.0f}s (<300s)")


def test_c09_osculating_identity():
    metric = metric_from_name("hyperbolic-randers:k=1,eps=0.05")
    surface = make_sphere(metric, 0.5, 20)
    u, w = surface.samples, np.ones((20, 1))
    S = shape_operator(surface, u)
    nd = S.normals
    y = nd.tangents[..., 0]
    gyy = np.einsum("mi,mij,mj->m", y, metric_tensor(metric, nd.foot, nd.normal), y)
    T = t_curvature_batch(metric, nd.foot, nd.normal, y)
    err = float(np.abs(normal_curvature(surface, u, w, normals=nd) - (S.osculating_curvature(w) - T / gyy)).max())
    report(9, "k_n = k~_n - T_n cross-check", err < 1e-4, f"max error {err:.1e} on 20 samples (tol 1e-4)")


def test_c10_determinism(tmp_path):
    scenarios = {
        "curvature-report": {"metric": "hyperbolic-randers:k=1,eps=0.05", "samples": 40, "seed": 3},
        "lemma2": {"T": 5, "trials": 5, "seed": 3},
        "focal": {"metric": "euclidean", "surface": "sphere:r=1", "outward": False, "T": 1.5,
                  "surface_samples": 3},
    }
    identical = []
    for cmd, cfg in scenarios.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{cmd}-{run}"
            assert cli_main([cmd, "--config", str(path), "--out", str(out)]) == 0
            outs.append(sorted(p.read_bytes() for p in out.glob("*.csv")))
        identical.append(outs[0] == outs[1] and len(outs[0]) > 0)
    report(10, "determinism", all(identical), f"{sum(identical)}/{len(identical)} commands byte-identical CSVs")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
