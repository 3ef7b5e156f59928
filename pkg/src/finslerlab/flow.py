"""Equidistant hypersurfaces ``N_t = exp_N(t n)`` and the convexity pipeline.

Samples of ``N`` are carried along their normal geodesics together with a
small parameter stencil around each sample, so tangent bases, second
derivatives and the congruence velocity field on ``N_t`` all come from
differencing the flow map across the stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import geodesic_coefficients, metric_tensor
from .errors import HypothesisViolated, StencilOutsideDomain
from .geodesics import _flow, default_frame, parallel_frame
from .hypersurface import (
    NormalData,
    normal_curvature,
    normal_vector,
    shape_from_congruence,
    shape_operator,
    solve_normals,
)
from .metrics import sample_chart
from .riccati import riccati_batch
from .tcurvature import t_bound_check, transverse_part

FLOW_STEP = 5e-3
FLOW_TOL = 1e-12


class ParamStencil:
    """4th-order central stencil in ``k`` parameters, with mixed points for second derivatives."""

    def __init__(self, k, h):
        self.k, self.h = k, h
        eye = np.eye(k)
        offs = [np.zeros(k)]
        self._pure = {}
        for a in range(k):
            for s in (1, -1, 2, -2):
                self._pure[(a, s)] = len(offs)
                offs.append(s * eye[a])
        self._mixed = {}
        for a in range(k):
            for b in range(a + 1, k):
                for r in (1, 2):
                    for sa in (r, -r):
                        for sb in (r, -r):
                            self._mixed[(a, b, sa, sb)] = len(offs)
                            offs.append(sa * eye[a] + sb * eye[b])
        self.offsets = np.array(offs)

    def __len__(self):
        return len(self.offsets)

    def points(self, u):
        return u[None] + self.h * self.offsets[:, None, :]

    def first(self, vals):
        """``vals`` ``(P, m, ...)`` -> derivatives ``(m, ..., k)``."""
        p, h = self._pure, self.h
        return np.stack([(8 * (vals[p[(a, 1)]] - vals[p[(a, -1)]]) - (vals[p[(a, 2)]] - vals[p[(a, -2)]])) / (12 * h)
                         for a in range(self.k)], -1)

    def second(self, vals):
        p, q, h = self._pure, self._mixed, self.h
        c = vals[0]
        out = np.empty(c.shape + (self.k, self.k))
        for a in range(self.k):
            out[..., a, a] = (-(vals[p[(a, 2)]] + vals[p[(a, -2)]]) + 16 * (vals[p[(a, 1)]] + vals[p[(a, -1)]])
                              - 30 * c) / (12 * h * h)
            for b in range(a + 1, self.k):
                D = [(vals[q[(a, b, r, r)]] - vals[q[(a, b, r, -r)]] - vals[q[(a, b, -r, r)]]
                      + vals[q[(a, b, -r, -r)]]) / (4 * (r * h) ** 2) for r in (1, 2)]
                out[..., a, b] = out[..., b, a] = (4 * D[0] - D[1]) / 3
        return out


def _directions(k, n=32):
    if k == 1:
        return np.ones((1, 1))
    th = np.pi * np.arange(n) / n  # k_n(w) = k_n(-w) for the curve-based formula up to reversal
    return np.stack([np.cos(th), np.sin(th)], -1)


@dataclass
class EquidistantState:
    t: float
    points: np.ndarray
    velocity: np.ndarray = field(repr=False)
    normals: NormalData = field(repr=False)
    normal_gap: float = 0.0
    kn: np.ndarray = field(default=None, repr=False)
    kn_min: np.ndarray = field(default=None, repr=False)
    kn_max: np.ndarray = field(default=None, repr=False)
    ktilde: np.ndarray = field(default=None, repr=False)  # eigenvalues of S_t, ascending
    ktilde_predicted: np.ndarray = field(default=None, repr=False)


class EquidistantFlow:
    """The normal-geodesic flow of ``surface`` on ``[0, T]`` (all samples at once)."""

    def __init__(self, surface, T, h=FLOW_STEP, tol=FLOW_TOL, directions=32):
        metric = surface.metric
        d = metric.dim
        k = d - 1
        self.surface, self.metric, self.T = surface, metric, float(T)
        u = surface.samples
        self.m = len(u)
        self.stencil = ParamStencil(k, h)
        self.dirs = _directions(k, directions)
        base = normal_vector(surface, u)
        pts = self.stencil.points(u)
        P = len(self.stencil)
        x = surface.point(pts)
        if not np.all(metric.chart.contains(x, metric.chart.margin)):
            raise StencilOutsideDomain("flow stencil leaves the chart")
        Tb = surface.jacobian(pts)
        seeds = np.broadcast_to(base.normal, x.shape).reshape(-1, d).copy()
        n, _, _, _ = solve_normals(metric, x.reshape(-1, d), Tb.reshape(-1, d, k), seeds)
        n = n.reshape(P, self.m, d)
        if np.any(np.einsum("pmi,mi->pm", n, base.normal) <= 0):
            raise StencilOutsideDomain("stencil normals flipped orientation")
        self.base = base
        self.flow = _flow(metric, x.reshape(-1, d), n.reshape(-1, d), T, rtol=tol, atol=tol)
        E0 = np.stack([default_frame(metric, base.foot[i], base.normal[i], first=base.tangents[i])
                       for i in range(self.m)])
        self.frame = parallel_frame(metric, (base.foot, base.normal, T), E0, tol=tol)
        self.S0 = shape_operator(surface)
        self.S0_frame = self.S0.frame_matrix(E0)

    def tangential_curvature(self, ts):
        """Frame curvature restricted to ``E_1..E_{n-1}``: ``(nt, m, k, k)``."""
        d = self.metric.dim
        return self.frame.curvature(ts)[..., : d - 1, : d - 1]

    def predicted(self, ts):
        """Eigenvalues of the Riccati solution ``S' = -S^2 - Rhat`` along each normal geodesic."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        K = riccati_batch(self.S0_frame, lambda t: self.tangential_curvature(t), self.T, ts)
        return np.linalg.eigvalsh(0.5 * (K + np.swapaxes(K, -1, -2)))

    def state(self, t, predicted=None) -> EquidistantState:
        metric, d, k = self.metric, self.metric.dim, self.metric.dim - 1
        P = len(self.stencil)
        x, v, _ = self.flow.state(t)
        x = x.reshape(P, self.m, d)
        v = v.reshape(P, self.m, d)
        xc, vc = x[0], v[0]
        Tt = self.stencil.first(x)
        Ht = self.stencil.second(x)
        n, _, _, _ = solve_normals(metric, xc, Tt, vc.copy())
        gap = float(np.abs(n - vc).max())
        nd = NormalData(xc, n, Tt, np.zeros(self.m), np.zeros(self.m))
        # measured k_n along the parameter lines through each sample
        W = np.broadcast_to(self.dirs, (self.m,) + self.dirs.shape)
        vel = np.einsum("mia,mka->mki", Tt, W)
        acc = np.einsum("miab,mka,mkb->mki", Ht, W, W)
        G = geodesic_coefficients(metric, np.broadcast_to(xc[:, None], vel.shape), vel)
        g = metric_tensor(metric, xc, n)
        num = np.einsum("mki,mij,mj->mk", acc + 2.0 * G, g, n)
        den = np.einsum("mki,mij,mkj->mk", vel, g, vel)
        kn = -num / den
        # osculating shape operator of the congruence on N_t
        S = shape_from_congruence(metric, NormalData(xc, vc, Tt, None, None), self.stencil.first(v))
        return EquidistantState(float(t), xc, vc, nd, gap, kn, kn.min(1), kn.max(1), S.eigenvalues(), predicted)


def equidistant(surface, t, h=FLOW_STEP, tol=FLOW_TOL) -> EquidistantState:
    """``N_t`` for a single flow time ``t >= 0``."""
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    if t == 0:
        flow = EquidistantFlow(surface, 1e-9, h, tol)
        return flow.state(0.0)
    flow = EquidistantFlow(surface, t, h, tol)
    return flow.state(t, flow.predicted([t])[0])


# --------------------------------------------------------------------------- Theorem 3


@dataclass
class ConvexityReport:
    t: float
    min_kn: float
    min_ktilde: float
    min_ktilde_predicted: float
    verdict: str
    theorem3_margin: float
    riccati_gap: float
    proposition3_margin: float
    normal_gap: float


@dataclass
class Theorem3Report:
    k: float
    delta: float
    reports: list
    hypotheses: dict
    passed: bool
    failures: list = field(default_factory=list)


def swept_samples(flow: EquidistantFlow, n, rng, times=None):
    """``(x, y, u)`` samples over the region swept by the flow.

    Feet, times and ``y`` are random; ``u`` is random and ``g_y``-orthogonal to ``y``.
    """
    d = flow.metric.dim
    times = np.linspace(0.0, flow.T, 7) if times is None else times
    ti = rng.integers(0, len(times), n)
    mi = rng.integers(0, flow.m, n)
    x_all = flow.frame.state(times)[0]  # (nt, m, d)
    x = x_all[ti, mi]
    y = rng.normal(size=(n, d))
    u = transverse_part(flow.metric, x, y, rng.normal(size=(n, d)))
    return x, y, u


def theorem3_verify(surface, k, delta, T=3.0, n_times=31, rng=None, t_samples=200, slack=1e-6,
                    tol=1e-4, cert_tol=0.0, flow=None, check_hypotheses=True) -> Theorem3Report:
    """Run the equidistant flow and check the convexity chain on ``[0, T]``.

    Hypotheses (raising :class:`HypothesisViolated`): flag curvature of the
    normal flags ``<= -k^2 + slack`` along every sampled normal geodesic,
    ``|T| <= delta`` on transverse samples of the swept region, and ``k_n > 2 delta`` on
    the base surface.  Conclusions, per flow time: the Riccati prediction
    ``k~ > delta``, the measured ``k_n >= k~ - delta - tol > 0`` and the
    agreement of predicted and stencil-measured ``k~``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    flow = flow or EquidistantFlow(surface, T)
    metric = flow.metric
    hyp = {}
    ts_fine = np.linspace(0.0, T, max(301, int(T / 0.01) + 1))
    Rt = flow.tangential_curvature(ts_fine)
    kmax = np.linalg.eigvalsh(0.5 * (Rt + np.swapaxes(Rt, -1, -2)))[..., -1]
    hyp["max_flag_curvature"] = float(kmax.max())
    if check_hypotheses and kmax.max() > -k * k + slack:
        i, j = np.unravel_index(np.argmax(kmax), kmax.shape)
        raise HypothesisViolated("flag curvature exceeds -k^2", {"t": float(ts_fine[i]), "sample": int(j),
                                                                 "K": float(kmax[i, j])})
    if t_samples:
        x, y, u = swept_samples(flow, t_samples, rng)
        tb = t_bound_check(metric, (x, y, u), delta, slack=slack)
        # the normal flags themselves
        xs, vs, _ = flow.frame.state(np.linspace(0.0, T, 4))
        E = flow.frame.frame(np.linspace(0.0, T, 4))[..., 0]
        tb2 = t_bound_check(metric, (xs.reshape(-1, metric.dim), vs.reshape(-1, metric.dim),
                                     E.reshape(-1, metric.dim)), delta, slack=slack)
        hyp["t_ratio"] = max(tb.max_ratio, tb2.max_ratio)
        if check_hypotheses and not (tb.ok and tb2.ok):
            raise HypothesisViolated("|T| <= delta", tb.witness or tb2.witness)
    base_kn = normal_curvature(surface, surface.samples, np.broadcast_to(flow.dirs, (flow.m,) + flow.dirs.shape),
                               normals=flow.base)
    hyp["base_min_kn"] = float(base_kn.min())
    if check_hypotheses and base_kn.min() <= 2 * delta:
        raise HypothesisViolated("k_n > 2 delta on the base surface", {"min_kn": float(base_kn.min())})

    ts = np.linspace(0.0, T, n_times)
    pred = flow.predicted(ts)
    reports, failures = [], []
    for i, t in enumerate(ts):
        st = flow.state(t, pred[i])
        min_kn = float(st.kn_min.min())
        kt_pred = pred[i][:, 0]
        gap = float(np.abs(pred[i] - st.ktilde).max())
        prop3 = float((st.kn_min - (kt_pred - delta)).min())
        rep = ConvexityReport(
            t=float(t), min_kn=min_kn, min_ktilde=float(st.ktilde[:, 0].min()),
            min_ktilde_predicted=float(kt_pred.min()),
            verdict="locally-convex" if min_kn > cert_tol else "not-certified",
            theorem3_margin=float(kt_pred.min() - delta), riccati_gap=gap,
            proposition3_margin=prop3, normal_gap=st.normal_gap,
        )
        reports.append(rep)
        if rep.theorem3_margin <= 0:
            failures.append(("riccati k~ > delta", float(t), rep.theorem3_margin))
        if prop3 < -tol:
            failures.append(("k_n >= k~ - delta - tol", float(t), prop3))
        if rep.verdict != "locally-convex":
            failures.append(("locally convex", float(t), min_kn))
    return Theorem3Report(float(k), float(delta), reports, hyp, not failures, failures)


def measure_certificate(metric, n=200, rng=None, fraction=0.9, region=None, method="shooting"):
    """Sweep flag curvature and T over chart samples: ``(k_hat, delta_hat, max K, min K)``.

    ``region`` optionally supplies the ``x`` samples; otherwise the chart is
    sampled (shrunk by ``fraction``).
    """
    from .curvature import flag_curvature
    from .tcurvature import measure_delta

    rng = np.random.default_rng(0) if rng is None else rng
    d = metric.dim
    x = sample_chart(metric.chart, d, n, rng, fraction) if region is None else region
    y = rng.normal(size=(len(x), d))
    u = rng.normal(size=(len(x), d))
    K = flag_curvature(metric, x, y, u)
    delta, _ = measure_delta(metric, (x, y, u), method=method)
    kmax = float(np.max(K))
    k_hat = float(np.sqrt(-kmax)) if kmax < 0 else 0.0
    return k_hat, float(delta), kmax, float(np.min(K))


def flow_certificate(flow: EquidistantFlow, n=400, rng=None, safety=1.1):
    """Measured ``(k, delta, info)`` for the region swept by ``flow``.

    ``k^2`` is the smallest of ``-K`` over random flags in the swept region and
    over the normal flags of the flow; ``delta`` is ``safety`` times the
    largest ``|T|/B`` ratio found on transverse samples and on the normal flags.
    """
    from .curvature import flag_curvature
    from .tcurvature import measure_delta

    rng = np.random.default_rng(0) if rng is None else rng
    d = flow.metric.dim
    x, y, u = swept_samples(flow, n, rng)
    K = flag_curvature(flow.metric, x, y, u)
    ts = np.linspace(0.0, flow.T, max(301, int(flow.T / 0.01) + 1))
    Rt = flow.tangential_curvature(ts)
    Kn = np.linalg.eigvalsh(0.5 * (Rt + np.swapaxes(Rt, -1, -2)))[..., -1]
    kmax = max(float(K.max()), float(Kn.max()))
    xs, vs, _ = flow.frame.state(np.linspace(0.0, flow.T, 4))
    E = flow.frame.frame(np.linspace(0.0, flow.T, 4))[..., 0]
    d1, _ = measure_delta(flow.metric, (x, y, u))
    d2, _ = measure_delta(flow.metric, (xs.reshape(-1, d), vs.reshape(-1, d), E.reshape(-1, d)))
    delta_hat = max(d1, d2)
    k = float(np.sqrt(-kmax)) * (1 - 1e-6) if kmax < 0 else 0.0
    info = {"max_K": kmax, "min_K": float(min(K.min(), Kn.min())), "delta_hat": delta_hat, "safety": safety}
    return k, safety * delta_hat, info


# --------------------------------------------------------------------------- geodesic balls

BALL_CONDITIONS = {
    "delta<k": lambda k, delta: delta < k,
    "delta<=k": lambda k, delta: delta <= k,
    "delta>k": lambda k, delta: delta > k,
}


@dataclass
class BallConvexityReport:
    center: list
    radius: float
    k: float
    delta: float
    condition: str
    condition_holds: bool
    hypotheses_hold: bool
    max_flag_curvature: float
    t_ratio: float
    min_ktilde: float
    min_kn: float
    convex: bool

    @property
    def consistent(self) -> bool:
        """False only when every hypothesis holds and the ball still fails to be convex."""
        return not (self.condition_holds and self.hypotheses_hold) or self.convex


def _unit_directions(metric, x, n, rng):
    d = metric.dim
    if d == 2:
        a = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        w = np.stack([np.cos(a), np.sin(a)], axis=1)
    else:
        w = rng.normal(size=(n, d))
    xs = np.broadcast_to(x, w.shape)
    return w / metric.F(xs, w)[:, None]


def ball_convexity(metric, center, radius, k, delta, condition="delta<k", n_dirs=32, n_tangent=32,
                   rng=None, slack=1e-6, method="jet") -> BallConvexityReport:
    """Convexity of the forward geodesic sphere ``S(center, radius)``.

    The condition relating ``k`` and ``delta`` is a parameter (a key of
    :data:`BALL_CONDITIONS` or a callable) because the literal statement and
    the convexity theorem disagree on its direction.  Along each radial
    geodesic the shape operator of the sphere is ``W^{-1}`` with
    ``W' = I + W R W``, ``W(0) = 0`` in a parallel frame; ``k_n`` follows from
    ``k~`` and the T-curvature of the radial normal.
    """
    from scipy.integrate import solve_ivp

    from .tcurvature import measure_delta, t_curvature_batch

    rng = np.random.default_rng(0) if rng is None else rng
    check = BALL_CONDITIONS[condition] if isinstance(condition, str) else condition
    d, kk = metric.dim, metric.dim - 1
    c = np.asarray(center, dtype=float)
    w = _unit_directions(metric, c, n_dirs, rng)
    frame = parallel_frame(metric, (np.broadcast_to(c, w.shape), w, radius))
    m = len(w)

    def tang(t):
        return frame.curvature(t)[..., :kk, :kk]

    def rhs(t, s):
        W = s.reshape(m, kk, kk)
        return (np.eye(kk) + W @ tang(t) @ W).ravel()

    res = solve_ivp(rhs, (0.0, radius), np.zeros(m * kk * kk), rtol=1e-11, atol=1e-13)
    W = res.y[:, -1].reshape(m, kk, kk)
    S = np.linalg.inv(0.5 * (W + np.swapaxes(W, 1, 2)))
    ts = np.linspace(0.0, radius, max(51, int(radius / 0.02) + 1))
    Kmax = float(np.linalg.eigvalsh(tang(ts)).max())

    xs, vs, _ = frame.state(np.linspace(0.0, radius, 4))
    E = frame.frame(np.linspace(0.0, radius, 4))[..., 0]
    t_ratio, _ = measure_delta(metric, (xs.reshape(-1, d), vs.reshape(-1, d), E.reshape(-1, d)), method=method)

    # tangent directions in frame coordinates
    if kk == 1:
        e = np.ones((1, 1))
    else:
        e = rng.normal(size=(n_tangent, kk))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
    x1, v1, E1 = frame.state(radius)
    kt = np.einsum("qa,mab,qb->mq", e, S, e)
    ychart = np.einsum("mia,qa->mqi", E1[..., :kk], e)
    T = t_curvature_batch(metric, x1, v1, ychart, method=method)
    kn = kt - T  # g_n(y, y) = 1 for unit frame coefficients
    hyp = Kmax <= -k * k + slack and t_ratio <= delta + slack
    min_kn = float(kn.min())
    return BallConvexityReport(c.tolist(), float(radius), float(k), float(delta),
                               condition if isinstance(condition, str) else getattr(condition, "__name__", "custom"),
                               bool(check(k, delta)), bool(hyp), Kmax, float(t_ratio),
                               float(np.linalg.eigvalsh(S).min()), min_kn, min_kn > 0)
