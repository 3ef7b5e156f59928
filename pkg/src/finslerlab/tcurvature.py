"""T-curvature: the gap between the Chern derivative and the Levi-Civita
derivative of the osculating metric ``g~ = g_Y`` of a geodesic field ``Y``.

The primary route builds ``Y`` as the radial field of the geodesic congruence
from a point ``p`` behind ``x`` (shooting), evaluates ``g~`` on a stencil and
differentiates it by central differences.  An exact jet formula, which uses
only ``Y(x) = y`` and ``(DY) y = -2G(x, y)``, serves as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import _check_point
from .curvature import (
    christoffel_first_kind,
    geodesic_coefficients,
    metric_derivatives,
    metric_tensor,
)
from .errors import DomainExit, GeodesicExtensionFailed, NewtonDivergence
from .geodesics import _flow

R0 = 0.1
STEP = 1e-3
SHOOT_TOL = 1e-12
NEWTON_TOL = 1e-10


@dataclass(frozen=True)
class TCurvatureValue:
    base: np.ndarray
    reference: np.ndarray
    direction: np.ndarray
    value: float


def _unit(metric, x, y):
    return y / metric.F(x, y)[..., None]


def _shoot_end(metric, p, v, tol):
    """Endpoint and end velocity of ``t -> exp_p(t v)`` at ``t = 1`` for a batch."""
    try:
        flow = _flow(metric, p, v, 1.0, rtol=tol, atol=tol)
    except DomainExit as exc:
        raise GeodesicExtensionFailed(f"radial geodesic left the chart at t={exc.exit_time:.4g}") from exc
    xe, ve, _ = flow.state(1.0)
    return xe, ve


class RadialField:
    """Unit radial geodesic field from a point ``p`` on the geodesic through ``(x, y)``.

    ``p`` lies ``r0`` chart units (to first order) behind ``x``.

    ``p`` is reached by integrating backwards, so the field is the congruence
    actually passing through ``x`` with velocity ``y`` even when ``F`` is not
    reversible.  Batched over samples.
    """

    def __init__(self, metric, x, y, r0=R0, tol=SHOOT_TOL):
        self.metric = metric
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.y = _unit(metric, self.x, np.atleast_2d(np.asarray(y, dtype=float)))
        # near the chart boundary p moves closer (half the remaining clearance)
        chart = metric.chart
        room = 0.5 * (chart.clearance(self.x) - chart.margin)
        if np.any(room <= 0):
            raise GeodesicExtensionFailed("sample lies inside the chart margin")
        self.r0 = np.minimum(r0, room)
        self.tol = tol
        # chart-unit speed scaled by r0, so p sits about r0 chart units behind x
        w = self.r0[:, None] * self.y / np.linalg.norm(self.y, axis=1, keepdims=True)
        try:
            flow = _flow(metric, self.x, w, -1.0, rtol=tol, atol=tol)
        except DomainExit as exc:
            raise GeodesicExtensionFailed("backward geodesic left the chart") from exc
        p, vp, _ = flow.state(-1.0)
        self.p = p
        self.v0 = vp  # exp_p(v0) = x
        self._jac = self._center_jacobian()

    def _center_jacobian(self, rel=1e-4):
        m, d = self.x.shape
        hstep = rel * np.linalg.norm(self.v0, axis=1)
        vs = [self.v0 + s * hstep[:, None] * e for e in np.eye(d) for s in (1, -1)]
        ends, _ = _shoot_end(self.metric, np.tile(self.p, (2 * d, 1)), np.concatenate(vs), self.tol)
        ends = ends.reshape(d, 2, m, d)
        return np.stack([(ends[k, 0] - ends[k, 1]) / (2 * hstep[:, None]) for k in range(d)], -1)

    def solve(self, targets, max_iter=20, tol=NEWTON_TOL):
        """Unit field ``Y`` at ``targets`` of shape ``(k, m, d)`` (``k`` points per sample)."""
        targets = np.asarray(targets, dtype=float)
        k, m, d = targets.shape
        jinv = np.linalg.inv(self._jac)
        v = self.v0 + np.einsum("mij,kmj->kmi", jinv, targets - self.x)
        p = np.broadcast_to(self.p, (k, m, d)).reshape(-1, d)
        for _ in range(max_iter):
            ends, vel = _shoot_end(self.metric, p, v.reshape(-1, d), self.tol)
            res = targets - ends.reshape(k, m, d)
            err = np.abs(res).max()
            if err < tol:
                break
            # chord update: the centre Jacobian is accurate to O(stencil size)
            v = v + np.einsum("mij,kmj->kmi", jinv, res)
        else:
            raise NewtonDivergence(f"radial shooting residual {err:.3g} after {max_iter} iterations")
        vel = vel.reshape(k, m, d)
        return _unit(self.metric, targets, vel), err


_W6 = {1: 45.0 / 60.0, 2: -9.0 / 60.0, 3: 1.0 / 60.0}


def osculating_christoffel(metric, x, y, h=STEP, r0=R0, tol=SHOOT_TOL, split=True):
    """First-kind Christoffel symbols of ``g~ = g_Y`` at ``x`` from a 6th-order stencil.

    With ``split`` the stencil differentiates only the field ``Y`` and the
    chain rule ``d_m g~ = d_x g + 2 C(., ., d_m Y)`` supplies the rest, which
    keeps the steep ``x``-dependence of the metric out of the difference
    quotient.  Otherwise ``g~`` itself is differenced.

    Returns ``(Gamma[m, l, j, k], g~(x)[m], dg~[m, i, j, k])`` for ``m`` samples.
    """
    field = RadialField(metric, x, y, r0, tol)
    m, d = field.x.shape
    hs = h * field.r0 / r0  # the stencil shrinks with the congruence
    offsets = [(a, s) for a in range(d) for s in (1, -1, 2, -2, 3, -3)]
    targets = np.stack([field.x + s * hs[:, None] * np.eye(d)[a] for a, s in offsets])
    Y, _ = field.solve(targets)
    vals = Y if split else metric_tensor(metric, targets, Y)
    deriv = np.zeros((m,) + vals.shape[2:] + (d,))
    hb = hs.reshape((m,) + (1,) * (vals.ndim - 2))
    for idx, (a, s) in enumerate(offsets):
        deriv[..., a] += np.sign(s) * _W6[abs(s)] * vals[idx] / hb
    if split:
        g0, dgx, C = metric_derivatives(metric, field.x, field.y)
        dg = dgx + 2.0 * np.einsum("mijl,mla->mija", C, deriv)
    else:
        g0, dg = metric_tensor(metric, field.x, field.y), deriv
    return christoffel_first_kind(dg), g0, dg


def osculating_christoffel_exact(metric, x, y):
    """Same symbols from jets: ``d g~ = d_x g + 2 C(., ., DY)`` with ``DY`` along ``y`` known exactly.

    Only the contractions with ``y`` that enter T are extension independent,
    so this returns the tensor ``y^l Gamma_ljk``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = _unit(metric, x, np.atleast_2d(np.asarray(y, dtype=float)))
    g, dgx, C = metric_derivatives(metric, x, y)
    G = geodesic_coefficients(metric, x, y)
    term1 = np.einsum("mi,mikj->mjk", y, dgx)
    term2 = -0.5 * np.einsum("mi,mjki->mjk", y, dgx)
    term3 = 2.0 * np.einsum("mjkl,ml->mjk", C, G)
    return 0.5 * (term1 + np.swapaxes(term1, 1, 2)) + term2 + term3


def _chern_term(metric, x, y, v):
    """``g_y(nabla_v V, y)`` for constant ``V``: ``N(x, v) v = 2G(x, v)``."""
    G = geodesic_coefficients(metric, x, v)
    g = metric_tensor(metric, x, y)
    return 2.0 * np.einsum("...i,...ij,...j->...", G, g, y)


def t_curvature_batch(metric, x, y, v, h=STEP, r0=R0, method="shooting", split=True):
    """``T_y(v)`` for samples ``x, y`` of shape ``(m, d)`` and ``v`` of shape ``(m, d)`` or ``(m, k, d)``.

    ``y`` is normalised to ``F(x, y) = 1``.  ``method="jet"`` uses the exact
    oracle formula instead of shooting.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = _unit(metric, x, np.atleast_2d(np.asarray(y, dtype=float)))
    v = np.asarray(v, dtype=float)
    single = v.ndim == 2
    vv = v[:, None, :] if single else v
    if method == "shooting":
        gamma, _, _ = osculating_christoffel(metric, x, y, h, r0, split=split)
        ygam = np.einsum("ml,mljk->mjk", y, gamma)
    elif method == "jet":
        ygam = osculating_christoffel_exact(metric, x, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    k = vv.shape[1]
    xb = np.repeat(x[:, None, :], k, 1)
    yb = np.repeat(y[:, None, :], k, 1)
    chern = _chern_term(metric, xb, yb, vv)
    lc = np.einsum("mjk,mpj,mpk->mp", ygam, vv, vv)
    T = chern - lc
    return T[:, 0] if single else T


def t_curvature(metric, x, y, v, h=STEP, r0=R0, method="shooting") -> TCurvatureValue:
    x, y = _check_point(metric, x, y)
    if np.linalg.norm(v) == 0.0:
        return TCurvatureValue(x, y, np.asarray(v, float), 0.0)
    val = t_curvature_batch(metric, x[None], y[None], np.asarray(v, float)[None], h, r0, method)
    return TCurvatureValue(x, _unit(metric, x, y), np.asarray(v, float), float(val[0]))


@dataclass
class TBoundResult:
    ok: bool
    delta: float
    max_ratio: float
    witness: dict | None
    T: np.ndarray
    bound: np.ndarray


def t_bound_bracket(metric, x, y, u):
    """``[g_y(u, u) - g_y(u, y/F(y))^2] F(y)``."""
    g = metric_tensor(metric, x, y)
    F = metric.F(x, y)
    guu = np.einsum("...i,...ij,...j->...", u, g, u)
    guy = np.einsum("...i,...ij,...j->...", u, g, y) / F
    return (guu - guy**2) * F


def t_bound_check(metric, samples, delta, method="shooting", T=None, slack=0.0) -> TBoundResult:
    """Check ``-delta B <= T_y(u) <= delta B`` with ``B`` the bracket above.

    ``samples`` is ``(x, y, u)`` with arrays of shape ``(m, d)``.  The lower
    inequality is the displayed bound; the mirrored upper one makes the
    condition ``|T| <= delta``.  Returns the worst sample as witness.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x, y, u = (np.atleast_2d(np.asarray(a, dtype=float)) for a in samples)
    y = _unit(metric, x, y)
    if T is None:
        T = t_curvature_batch(metric, x, y, u, method=method)
    B = t_bound_bracket(metric, x, y, u)
    excess = np.abs(T) - delta * B - slack
    ratio = np.where(B > 1e-14, np.abs(T) / np.maximum(B, 1e-300), 0.0)
    i = int(np.argmax(excess))
    ok = bool(excess[i] <= 0.0)
    witness = None if ok else {"index": i, "x": x[i].tolist(), "y": y[i].tolist(), "u": u[i].tolist(),
                               "T": float(T[i]), "bound": float(delta * B[i])}
    return TBoundResult(ok, float(delta), float(ratio.max()), witness, T, B)


def transverse_part(metric, x, y, u):
    """Component of ``u`` that is ``g_y``-orthogonal to ``y``."""
    y = _unit(metric, x, y)
    g = metric_tensor(metric, x, y)
    return u - np.einsum("...i,...ij,...j->...", u, g, y)[..., None] * y


def measure_delta(metric, samples, method="shooting", transverse=True) -> tuple[float, np.ndarray]:
    """Smallest ``delta`` with ``|T_y(u)| <= delta B`` on the samples.

    By default ``u`` is first replaced by its ``g_y``-orthogonal part, the
    only regime in which ``T`` enters the convexity estimates.  For a
    non-reversible spray ``T_y(-y)`` is nonzero while ``B`` vanishes there,
    so the raw ratio is unbounded near ``u = -y``.
    """
    x, y, u = (np.atleast_2d(np.asarray(a, dtype=float)) for a in samples)
    if transverse:
        u = transverse_part(metric, x, y, u)
    res = t_bound_check(metric, (x, y, u), 0.0, method=method)
    return res.max_ratio, res.T


def stencil_flag_curvature(metric, x, y, u, h=STEP, r0=R0, tol=SHOOT_TOL):
    """Sectional curvature of ``g~ = g_Y`` on ``span{Y, u}`` from a second-order stencil of ``g~``.

    Used to check that the osculating Riemannian metric of a geodesic field
    reproduces the flag curvature on flags containing ``Y``.
    """
    field = RadialField(metric, x, y, r0, tol)
    m, d = field.x.shape
    eye = np.eye(d)
    pts, keys = [], []
    for a in range(d):
        for s in (1, -1, 2, -2):
            pts.append(field.x + s * h * eye[a])
            keys.append((a, a, s, s))
    for a in range(d):
        for b in range(a + 1, d):
            for r in (1, 2):
                for sa in (r, -r):
                    for sb in (r, -r):
                        pts.append(field.x + h * (sa * eye[a] + sb * eye[b]))
                        keys.append((a, b, sa, sb))
    targets = np.stack(pts)
    Y, _ = field.solve(targets)
    gt = metric_tensor(metric, targets, Y)
    g0 = metric_tensor(metric, field.x, field.y)
    lookup = {k: gt[i] for i, k in enumerate(keys)}
    dg = np.zeros((m, d, d, d))
    d2 = np.zeros((m, d, d, d, d))
    for a in range(d):
        p1, m1 = lookup[(a, a, 1, 1)], lookup[(a, a, -1, -1)]
        p2, m2 = lookup[(a, a, 2, 2)], lookup[(a, a, -2, -2)]
        dg[..., a] = (8 * (p1 - m1) - (p2 - m2)) / (12 * h)
        d2[..., a, a] = (-(p2 + m2) + 16 * (p1 + m1) - 30 * g0) / (12 * h * h)
    for a in range(d):
        for b in range(a + 1, d):
            D = []
            for r in (1, 2):
                f = lookup
                D.append((f[(a, b, r, r)] - f[(a, b, r, -r)] - f[(a, b, -r, r)] + f[(a, b, -r, -r)])
                         / (4 * (r * h) ** 2))
            mixed = (4 * D[0] - D[1]) / 3
            d2[..., a, b] = d2[..., b, a] = mixed
    gam1 = christoffel_first_kind(dg)  # (m, l, j, k)
    ginv = np.linalg.inv(g0)
    gam2 = np.einsum("mil,mljk->mijk", ginv, gam1)
    # R_ijkl = 1/2(g_il,jk + g_jk,il - g_ik,jl - g_jl,ik) + g_mn (G^m_il G^n_jk - G^m_ik G^n_jl)
    Rm = 0.5 * (
        np.einsum("miljk->mijkl", d2)
        + np.einsum("mjkil->mijkl", d2)
        - np.einsum("mikjl->mijkl", d2)
        - np.einsum("mjlik->mijkl", d2)
    ) + (
        np.einsum("mpq,mpil,mqjk->mijkl", g0, gam2, gam2)
        - np.einsum("mpq,mpik,mqjl->mijkl", g0, gam2, gam2)
    )
    yy = field.y
    u = np.atleast_2d(np.asarray(u, dtype=float))
    num = np.einsum("mijkl,mi,mj,mk,ml->m", Rm, u, yy, u, yy)
    gyy = np.einsum("mi,mij,mj->m", yy, g0, yy)
    guu = np.einsum("mi,mij,mj->m", u, g0, u)
    gyu = np.einsum("mi,mij,mj->m", yy, g0, u)
    return num / (gyy * guu - gyu**2)
