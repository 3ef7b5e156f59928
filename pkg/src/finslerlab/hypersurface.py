"""Parametric hypersurfaces: normals, normal curvature and the shape operator.

Sign convention: with ``n`` the chosen oriented normal,

    k_n(y) = -g_n(c'' + 2G(c, c'), n) / g_n(y, y),

so a Euclidean sphere of radius ``r`` has ``k_n = 1/r`` for the outward
normal and ``-1/r`` for the inward one.  The shape operator ``S(w) =
nabla~_w n`` uses the same orientation, hence ``k~_n(y) = g_n(S y, y) /
g_n(y, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .curvature import (
    christoffel_first_kind,
    geodesic_coefficients,
    metric_derivatives,
    metric_tensor,
)
from .errors import EvaluationOutsideDomain, NewtonDivergence, StencilOutsideDomain
from .geodesics import default_frame, parallel_frame
from .jacobi import focal_scan
from .metrics import parse_preset

SIGN_CONVENTION = "k_n = -g_n(c'' + 2G(c,c'), n) / g_n(y,y); outward sphere normal gives k_n > 0"
IMMERSION_TOL = 1e-8
SHAPE_STEP = 1e-3


@dataclass(eq=False)
class ImmersedHypersurface:
    """``u -> x(u)`` from a ``(dim-1)``-parameter domain with closed-form derivatives.

    ``point``, ``jacobian`` (``(..., d, d-1)``) and ``hessian``
    (``(..., d, d-1, d-1)``) act on parameter arrays ``(..., d-1)``.
    ``orientation(u)`` returns a Euclidean vector on the outer side.
    """

    metric: object
    point: Callable
    jacobian: Callable
    hessian: Callable
    orientation: Callable
    samples: np.ndarray
    outward: bool = True
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.samples.shape[-1] != self.metric.dim - 1:
            raise ValueError("parameter samples must have dim-1 components")
        sv = np.linalg.svd(self.jacobian(self.samples), compute_uv=False)[..., -1]
        if np.any(sv <= IMMERSION_TOL):
            raise ValueError(f"not an immersion: smallest singular value {sv.min():.3g}")
        if not np.all(self.metric.chart.contains(self.point(self.samples), self.metric.chart.margin)):
            raise EvaluationOutsideDomain("hypersurface samples leave the chart")

    @property
    def sign(self):
        return 1.0 if self.outward else -1.0

    def reversed(self) -> "ImmersedHypersurface":
        return ImmersedHypersurface(self.metric, self.point, self.jacobian, self.hessian, self.orientation,
                                    self.samples, not self.outward, self.name, dict(self.params))

    def with_samples(self, samples) -> "ImmersedHypersurface":
        return ImmersedHypersurface(self.metric, self.point, self.jacobian, self.hessian, self.orientation,
                                    samples, self.outward, self.name, dict(self.params))


# --------------------------------------------------------------------------- presets


def _omega(u):
    """Unit sphere chart with first and second derivatives."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] == 1:
        p = u[..., 0]
        c, s = np.cos(p), np.sin(p)
        w = np.stack([c, s], -1)
        dw = np.stack([-s, c], -1)[..., None]
        ddw = -w[..., None, None]
        return w, dw, ddw
    th, ph = u[..., 0], u[..., 1]
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    z = np.zeros_like(th)
    w = np.stack([st * cp, st * sp, ct], -1)
    wt = np.stack([ct * cp, ct * sp, -st], -1)
    wp = np.stack([-st * sp, st * cp, z], -1)
    wtp = np.stack([-ct * sp, ct * cp, z], -1)
    wpp = np.stack([-st * cp, -st * sp, z], -1)
    dw = np.stack([wt, wp], -1)
    ddw = np.stack([np.stack([-w, wtp], -1), np.stack([wtp, wpp], -1)], -1)
    return w, dw, ddw


def _radial_surface(metric, rho, axes, center, samples, outward, name, params):
    """``x = c + A (rho(u) omega(u))`` with ``A = diag(axes)``."""
    A = np.asarray(axes, dtype=float)
    c = np.asarray(center, dtype=float)

    def point(u):
        w, _, _ = _omega(u)
        r, _, _ = rho(u)
        return c + A * (r[..., None] * w)

    def jacobian(u):
        w, dw, _ = _omega(u)
        r, dr, _ = rho(u)
        return A[:, None] * (w[..., :, None] * dr[..., None, :] + r[..., None, None] * dw)

    def hessian(u):
        w, dw, ddw = _omega(u)
        r, dr, ddr = rho(u)
        out = (w[..., :, None, None] * ddr[..., None, :, :]
               + dw[..., :, :, None] * dr[..., None, None, :]
               + dw[..., :, None, :] * dr[..., None, :, None]
               + r[..., None, None, None] * ddw)
        return A[:, None, None] * out

    def orientation(u):
        return point(u) - c

    return ImmersedHypersurface(metric, point, jacobian, hessian, orientation, samples, outward, name, params)


def _constant_rho(R, k):
    def rho(u):
        shape = np.shape(u)[:-1]
        return np.full(shape, R), np.zeros(shape + (k,)), np.zeros(shape + (k, k))

    return rho


def _perturbed_rho(R, amp, mode, k):
    def rho(u):
        u = np.asarray(u, dtype=float)
        if k == 1:
            p = u[..., 0]
            cm, sm = np.cos(mode * p), np.sin(mode * p)
            r = R * (1 + amp * cm)
            dr = (-R * amp * mode * sm)[..., None]
            ddr = (-R * amp * mode**2 * cm)[..., None, None]
            return r, dr, ddr
        th, ph = u[..., 0], u[..., 1]
        cm, sm, st, ct = np.cos(mode * ph), np.sin(mode * ph), np.sin(th), np.cos(th)
        r = R * (1 + amp * cm * st)
        dr = np.stack([R * amp * cm * ct, -R * amp * mode * sm * st], -1)
        rtt = -R * amp * cm * st
        rtp = -R * amp * mode * sm * ct
        rpp = -R * amp * mode**2 * cm * st
        ddr = np.stack([np.stack([rtt, rtp], -1), np.stack([rtp, rpp], -1)], -1)
        return r, dr, ddr

    return rho


def sphere_grid(dim, n, polar_margin=0.35):
    """Parameter samples: ``n`` angles on the circle, or a ``~sqrt(n)`` square grid avoiding the poles."""
    if dim == 2:
        return (2 * np.pi * (np.arange(n) + 0.5) / n)[:, None]
    nt = max(2, int(round(math.sqrt(n))))
    nphi = max(2, int(math.ceil(n / nt)))
    th = np.linspace(polar_margin, np.pi - polar_margin, nt)
    ph = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.stack([T.ravel(), P.ravel()], -1)[:n]


def _chart_radius(metric, r):
    f = metric.radial_chart_radius
    return float(f(r)) if f is not None else float(r)


def make_sphere(metric, r, n=16, center=None, outward=True):
    """Metric sphere of radius ``r`` about the chart origin (exact for the space forms)."""
    d = metric.dim
    R = _chart_radius(metric, r)
    return _radial_surface(metric, _constant_rho(R, d - 1), np.ones(d), np.zeros(d) if center is None else center,
                           sphere_grid(d, n), outward, f"sphere:r={r:g}", {"r": r, "chart_radius": R})


def make_ellipsoid(metric, a, b, c=None, n=16, outward=True):
    d = metric.dim
    axes = [_chart_radius(metric, a), _chart_radius(metric, b)]
    if d == 3:
        axes.append(_chart_radius(metric, c if c is not None else b))
    return _radial_surface(metric, _constant_rho(1.0, d - 1), axes, np.zeros(d), sphere_grid(d, n), outward,
                           f"ellipsoid:a={a:g},b={b:g}", {"a": a, "b": b, "c": c})


def make_perturbed_sphere(metric, r, amp, mode, n=16, outward=True):
    d = metric.dim
    R = _chart_radius(metric, r)
    return _radial_surface(metric, _perturbed_rho(R, amp, int(mode), d - 1), np.ones(d), np.zeros(d),
                           sphere_grid(d, n), outward, f"perturbed-sphere:r={r:g},amp={amp:g},mode={int(mode)}",
                           {"r": r, "amp": amp, "mode": int(mode)})


def make_plane(metric, normal, origin=None, n=16, extent=0.5, outward=True):
    """Affine hyperplane through ``origin`` with Euclidean normal ``normal``."""
    d = metric.dim
    e = np.asarray(normal, dtype=float)
    e = e / np.linalg.norm(e)
    basis = np.linalg.svd(e[None, :])[2][1:].T  # (d, d-1), orthonormal complement
    o = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)

    def point(u):
        return o + np.asarray(u) @ basis.T

    def jacobian(u):
        return np.broadcast_to(basis, np.shape(u)[:-1] + basis.shape)

    def hessian(u):
        return np.zeros(np.shape(u)[:-1] + (d, d - 1, d - 1))

    def orientation(u):
        return np.broadcast_to(e, np.shape(u)[:-1] + (d,))

    if d == 2:
        samples = np.linspace(-extent, extent, n)[:, None]
    else:
        k = max(2, int(round(math.sqrt(n))))
        g = np.linspace(-extent, extent, k)
        samples = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    return ImmersedHypersurface(metric, point, jacobian, hessian, orientation, samples, outward,
                                "plane", {"normal": e.tolist()})


def surface_from_name(metric, text, n=16, outward=True) -> ImmersedHypersurface:
    """``"sphere:r=0.5"``, ``"ellipsoid:a=1,b=0.7"``, ``"perturbed-sphere:r=1,amp=0.05,mode=3"``, ``"plane:normal=0,1"``."""
    name, p = parse_preset(text)
    if name == "sphere":
        return make_sphere(metric, p.get("r", 1.0), n, outward=outward)
    if name == "ellipsoid":
        return make_ellipsoid(metric, p.get("a", 1.0), p.get("b", 0.7), p.get("c"), n, outward=outward)
    if name == "perturbed-sphere":
        return make_perturbed_sphere(metric, p.get("r", 1.0), p.get("amp", 0.05), p.get("mode", 3), n,
                                     outward=outward)
    if name == "plane":
        return make_plane(metric, np.atleast_1d(p.get("normal", [0.0] * (metric.dim - 1) + [1.0])), n=n,
                          outward=outward)
    raise ValueError(f"unknown surface preset {text!r}")


# --------------------------------------------------------------------------- normals


@dataclass
class NormalData:
    foot: np.ndarray
    normal: np.ndarray
    tangents: np.ndarray = field(repr=False)
    tangency_residual: np.ndarray = field(repr=False)
    unit_residual: np.ndarray = field(repr=False)
    iterations: int = 0


def euclidean_normal(T, orient):
    """Unit Euclidean normal of the tangent basis ``T`` (``(..., d, d-1)``) on the side of ``orient``."""
    U = np.linalg.svd(T)[0]
    nu = U[..., :, -1]
    s = np.sign(np.einsum("...i,...i->...", nu, orient))
    s = np.where(s == 0, 1.0, s)
    return nu * s[..., None]


def solve_normals(metric, x, T, seed, max_iter=50, tol=1e-9):
    """Newton for ``{T^t g_n n = 0, F(n) = 1}`` from ``seed`` (batch ``(m, d)``)."""
    n = seed / metric.F(x, seed)[..., None]
    for it in range(1, max_iter + 1):
        g = metric_tensor(metric, x, n)
        gn = np.einsum("...ij,...j->...i", g, n)
        Fn = metric.F(x, n)
        r = np.concatenate([np.einsum("...ia,...i->...a", T, gn), (Fn - 1.0)[..., None]], -1)
        J = np.concatenate([np.einsum("...ia,...ij->...aj", T, g), (gn / Fn[..., None])[..., None, :]], -2)
        step = np.linalg.solve(J, r[..., None])[..., 0]
        n = n - step
        if np.abs(step).max() < 1e-15 * max(1.0, np.abs(n).max()) or np.abs(r).max() < 1e-15:
            break
    g = metric_tensor(metric, x, n)
    tang = np.abs(np.einsum("...ia,...ij,...j->...a", T, g, n)).max(-1)
    unit = np.abs(metric.F(x, n) - 1.0)
    if not np.all(np.isfinite(n)) or tang.max() > tol or unit.max() > 1e-10:
        raise NewtonDivergence(f"normal residual {max(tang.max(), unit.max()):.3g} after {it} iterations")
    return n, tang, unit, it


def normal_vector(surface: ImmersedHypersurface, u=None, sign=None) -> NormalData:
    """Oriented unit normal(s) at parameter(s) ``u`` (default: the sample grid).

    ``sign=-1`` solves for the opposite normal independently, seeded from the
    reversed Euclidean normal; for non-reversible metrics it is not ``-n``.
    """
    u = surface.samples if u is None else np.atleast_2d(np.asarray(u, dtype=float))
    s = surface.sign if sign is None else float(sign)
    x = surface.point(u)
    T = surface.jacobian(u)
    seed = s * euclidean_normal(T, surface.orientation(u))
    n, tang, unit, it = solve_normals(surface.metric, x, T, seed)
    return NormalData(x, n, T, tang, unit, it)


def normal_curvature(surface: ImmersedHypersurface, u, w, sign=None, normals: NormalData | None = None):
    """``k_n`` at parameters ``u`` (``(m, d-1)``) along parameter directions ``w`` (``(m, d-1)`` or ``(m, k, d-1)``).

    Uses the straight parameter line ``s -> x(u + s w)``; tangential parts of
    its acceleration drop out against ``g_n(., n)``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    w = np.asarray(w, dtype=float)
    single = w.ndim == 2
    ww = w[:, None, :] if single else w
    nd = normals if normals is not None else normal_vector(surface, u, sign)
    H = surface.hessian(u)
    metric = surface.metric
    vel = np.einsum("mia,mka->mki", nd.tangents, ww)
    acc = np.einsum("miab,mka,mkb->mki", H, ww, ww)
    xb = np.broadcast_to(nd.foot[:, None, :], vel.shape)
    nb = np.broadcast_to(nd.normal[:, None, :], vel.shape)
    G = geodesic_coefficients(metric, xb, vel)
    g = metric_tensor(metric, nd.foot, nd.normal)[:, None]
    num = np.einsum("mki,mkij,mkj->mk", acc + 2.0 * G, np.broadcast_to(g, vel.shape + (vel.shape[-1],)), nb)
    den = np.einsum("mki,mkij,mkj->mk", vel, np.broadcast_to(g, vel.shape + (vel.shape[-1],)), vel)
    k = -num / den
    return k[:, 0] if single else k


# --------------------------------------------------------------------------- shape operator


@dataclass
class ShapeOperator:
    """``S`` at a batch of feet: ``matrix[m]`` acts on tangent-basis coordinates."""

    normals: NormalData = field(repr=False)
    matrix: np.ndarray
    chart_matrix: np.ndarray = field(repr=False)
    normal_residual: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    def osculating_curvature(self, w):
        """``k~_n`` along tangent-basis directions ``w`` (``(m, d-1)`` or ``(m, k, d-1)``)."""
        w = np.asarray(w, dtype=float)
        single = w.ndim == 2
        ww = w[:, None, :] if single else w
        T = self.normals.tangents
        gt = np.einsum("mia,mij,mjb->mab", T, self.g, T)
        num = np.einsum("mka,mab,mbc,mkc->mk", ww, gt, self.matrix, ww)
        den = np.einsum("mka,mab,mkb->mk", ww, gt, ww)
        k = num / den
        return k[:, 0] if single else k

    def self_adjoint_residual(self):
        T = self.normals.tangents
        gt = np.einsum("mia,mij,mjb->mab", T, self.g, T)
        B = gt @ self.matrix
        return np.abs(B - np.swapaxes(B, 1, 2)).max(axis=(1, 2))

    def eigenvalues(self):
        """Eigenvalues (ascending); ``S`` is ``g_n``-self-adjoint so they are real."""
        T = self.normals.tangents
        gt = np.einsum("mia,mij,mjb->mab", T, self.g, T)
        L = np.linalg.cholesky(gt)
        Li = np.linalg.inv(L)
        sym = np.swapaxes(L, 1, 2) @ self.matrix @ np.swapaxes(Li, 1, 2)
        return np.linalg.eigvalsh(0.5 * (sym + np.swapaxes(sym, 1, 2)))

    def frame_matrix(self, E):
        """``g_n(E_b, S E_a)`` on the first ``d-1`` columns of frames ``E`` (``(m, d, d)``)."""
        Et = E[..., :-1]
        SE = self.chart_matrix @ Et
        return np.einsum("mib,mij,mja->mba", Et, self.g, SE)


def _param_stencil(surface, u, h):
    k = u.shape[-1]
    offsets = [(a, s) for a in range(k) for s in (1, -1, 2, -2)]
    pts = np.stack([u + s * h * np.eye(k)[a] for a, s in offsets])
    return offsets, pts


def shape_operator(surface: ImmersedHypersurface, u=None, sign=None, h=SHAPE_STEP) -> ShapeOperator:
    """``S(w) = nabla~_w n`` with ``g~ = g_Y`` for the normal congruence ``Y``.

    ``dn`` comes from a 4th-order parameter stencil of Newton normals.  ``Y``
    agrees with ``n`` on the surface, its tangential derivative is ``dn`` and
    its derivative along ``n`` is ``-2G(x, n)``; the chain rule
    ``d g~ = d_x g + 2C(., ., DY)`` then gives the Christoffel symbols of ``g~``.
    """
    u = surface.samples if u is None else np.atleast_2d(np.asarray(u, dtype=float))
    metric = surface.metric
    d = metric.dim
    nd = normal_vector(surface, u, sign)
    offsets, pts = _param_stencil(surface, u, h)
    xs = surface.point(pts)
    if not np.all(metric.chart.contains(xs, metric.chart.margin)):
        raise StencilOutsideDomain("shape-operator stencil leaves the chart")
    s = surface.sign if sign is None else float(sign)
    Ts = surface.jacobian(pts)
    seeds = np.broadcast_to(nd.normal, xs.shape)
    ns, _, _, _ = solve_normals(metric, xs.reshape(-1, d), Ts.reshape(-1, d, d - 1), seeds.reshape(-1, d).copy())
    ns = ns.reshape(xs.shape)
    if np.any(np.einsum("kmi,mi->km", ns, nd.normal) <= 0):
        raise StencilOutsideDomain("stencil normals flipped orientation")
    W = {1: 8.0 / 12.0, 2: -1.0 / 12.0}
    dn = np.zeros((len(u), d, d - 1))
    for idx, (a, sgn) in enumerate(offsets):
        dn[..., a] += np.sign(sgn) * W[abs(sgn)] * ns[idx] / h
    return shape_from_congruence(metric, nd, dn)


def shape_from_congruence(metric, nd: NormalData, dY) -> ShapeOperator:
    """Shape operator from the unit geodesic field ``Y`` with ``Y = n`` on the surface.

    ``dY[m, i, a]`` is the derivative of ``Y`` along the tangent ``T[:, :, a]``;
    along ``n`` the geodesic equation gives ``-2G(x, n)``.
    """
    x, n, T = nd.foot, nd.normal, nd.tangents
    G = geodesic_coefficients(metric, x, n)
    basis = np.concatenate([T, n[..., None]], -1)
    images = np.concatenate([dY, -2.0 * G[..., None]], -1)
    DY = images @ np.linalg.inv(basis)
    g, dgx, C = metric_derivatives(metric, x, n)
    dg = dgx + 2.0 * np.einsum("mijl,mla->mija", C, DY)
    gam = np.einsum("mil,mljk->mijk", np.linalg.inv(g), christoffel_first_kind(dg))
    S_t = dY + np.einsum("mijk,mj,mka->mia", gam, n, T)
    # tangent-basis coordinates through the g_n-orthogonal projection
    gt = np.einsum("mia,mij,mjb->mab", T, g, T)
    P = np.linalg.solve(gt, np.einsum("mia,mij->maj", T, g))  # (m, d-1, d)
    matrix = P @ S_t
    normal_res = np.abs(np.einsum("mia,mij,mj->ma", S_t, g, n)).max(-1)
    return ShapeOperator(nd, matrix, T @ matrix @ P, normal_res, g)


def detect_focal(surface: ImmersedHypersurface, u, sign=None, T_max=5.0):
    """Focal times along the normal geodesic from the foot at parameter ``u``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    S = shape_operator(surface, u, sign)
    nd = S.normals
    metric = surface.metric
    E0 = default_frame(metric, nd.foot[0], nd.normal[0], first=nd.tangents[0])
    frame = parallel_frame(metric, (nd.foot, nd.normal, T_max), E0[None])
    S_frame = S.frame_matrix(E0[None])[0]
    return focal_scan(frame, S_frame)
