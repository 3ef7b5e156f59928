"""Jacobi fields in a parallel frame, focal points, index forms and comparison.

Along a unit-speed geodesic with parallel ``g_c'``-orthonormal frame ``E``
(``E_n = c'``) a field ``J = phi^a E_a`` is Jacobi iff ``phi'' = -Rhat phi``
where ``Rhat`` is the frame matrix of ``R_c'``.  Norms, inner products and
transplantation then reduce to Euclidean operations on ``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .curvature import metric_tensor
from .errors import (
    HypothesisViolated,
    IntegrationFailure,
    QuadratureFailure,
    SpanMismatch,
)
from .geodesics import GeodesicPath, ParallelFrame, parallel_frame

JACOBI_TOL = 1e-11


@dataclass
class JacobiRecord:
    """One or several Jacobi fields along a geodesic (frame components).

    ``phi`` and ``dphi`` on ``grid`` have shape ``(nt, d, m)`` for ``m``
    fields; :meth:`at` evaluates the dense solution anywhere in the span.
    """

    frame: ParallelFrame
    member: int
    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    origin: str
    shape_operator: np.ndarray | None = None
    _sol: object = field(default=None, repr=False)

    @property
    def nfields(self):
        return self.phi.shape[-1]

    def at(self, t):
        """``(phi, phi')`` with shapes ``(..., d, m)``."""
        d, m = self.phi.shape[1:]
        vals = np.moveaxis(self._sol(np.atleast_1d(t)), -1, 0)
        phi = vals[:, : d * m].reshape(-1, d, m)
        dphi = vals[:, d * m:].reshape(-1, d, m)
        if np.ndim(t) == 0:
            return phi[0], dphi[0]
        return phi, dphi

    def norm(self, t=None):
        """``sqrt(g_c'(J, J))`` per field."""
        phi = self.phi if t is None else self.at(t)[0]
        return np.linalg.norm(phi, axis=-2)

    def chart(self, t=None):
        """``(J, nabla J)`` in chart components, shapes ``(..., d, m)``."""
        ts = self.grid if t is None else t
        phi, dphi = (self.phi, self.dphi) if t is None else self.at(t)
        E = self.frame.frame(ts)[..., self.member, :, :]
        return E @ phi, E @ dphi

    def chart_gram(self, t=None):
        """``g_c'(J_a, J_b)`` and ``g_c'(J_a, nabla J_b)`` from chart components and ``g``."""
        ts = self.grid if t is None else t
        x, v, _ = self.frame.state(ts)
        g = metric_tensor(self.frame.metric, x[..., self.member, :], v[..., self.member, :])
        J, dJ = self.chart(t)
        return (np.einsum("...ia,...ij,...jb->...ab", J, g, J),
                np.einsum("...ia,...ij,...jb->...ab", J, g, dJ))

    def residual(self, t, h=1e-4):
        """``|phi'' + Rhat phi|`` with ``phi''`` by central differences of the dense output."""
        t = np.atleast_1d(t)
        acc = (self.at(t + h)[1] - self.at(t - h)[1]) / (2 * h)
        R = self.frame.curvature(t)[:, self.member]
        return np.abs(acc + R @ self.at(t)[0]).max(axis=(1, 2))

    def field(self, index=0) -> "FrameField":
        def value(t):
            p, dp = self.at(t)
            return p[..., index], dp[..., index]

        return FrameField(value)


def _as_frame(geodesic, metric=None) -> ParallelFrame:
    if isinstance(geodesic, ParallelFrame):
        return geodesic
    if isinstance(geodesic, GeodesicPath):
        return parallel_frame(geodesic.metric, geodesic)
    raise TypeError("expected a GeodesicPath or ParallelFrame")


def _solve_frame_jacobi(frame, member, phi0, dphi0, grid, tol):
    d, m = phi0.shape

    def rhs(t, s):
        phi = s[: d * m].reshape(d, m)
        R = frame.curvature(t)[member]
        return np.concatenate([s[d * m:], (-R @ phi).ravel()])

    s0 = np.concatenate([phi0.ravel(), dphi0.ravel()])
    res = solve_ivp(rhs, (0.0, frame.T), s0, method="RK45", rtol=tol, atol=tol, dense_output=True)
    if res.status != 0:
        raise IntegrationFailure(res.message)
    vals = res.sol(grid).T
    return res.sol, vals[:, : d * m].reshape(-1, d, m), vals[:, d * m:].reshape(-1, d, m)


def _grid(frame, grid):
    if grid is None:
        return np.linspace(0.0, frame.T, max(301, int(round(abs(frame.T) / 0.01)) + 1))
    return np.asarray(grid, dtype=float)


def integrate_jacobi(geodesic, J0, J0prime, grid=None, member=0, tol=JACOBI_TOL,
                     origin="point-Jacobi", shape_operator=None) -> JacobiRecord:
    """Solve ``nabla nabla J + R_c'(J) = 0`` from ``J(0) = J0``, ``nabla J(0) = J0prime``.

    ``J0`` and ``J0prime`` are chart components, ``(d,)`` or ``(d, m)``.
    ``geodesic`` is a :class:`GeodesicPath` (a default frame is built) or a
    :class:`ParallelFrame`.
    """
    frame = _as_frame(geodesic)
    J0 = np.asarray(J0, dtype=float)
    J0prime = np.asarray(J0prime, dtype=float)
    single = J0.ndim == 1
    J0 = J0[:, None] if single else J0
    J0prime = J0prime[:, None] if J0prime.ndim == 1 else J0prime
    E0 = frame.frame(0.0)[member]
    phi0 = np.linalg.solve(E0, J0)
    dphi0 = np.linalg.solve(E0, J0prime)
    return _record(frame, member, phi0, dphi0, grid, tol, origin, shape_operator)


def _record(frame, member, phi0, dphi0, grid, tol, origin, shape_operator):
    grid = _grid(frame, grid)
    sol, phi, dphi = _solve_frame_jacobi(frame, member, phi0, dphi0, grid, tol)
    return JacobiRecord(frame, member, grid, phi, dphi, origin, shape_operator, sol)


def integrate_jacobi_frame(frame, phi0, dphi0, grid=None, member=0, tol=JACOBI_TOL,
                           origin="point-Jacobi", shape_operator=None) -> JacobiRecord:
    """As :func:`integrate_jacobi` with initial data given in frame components."""
    phi0 = np.asarray(phi0, dtype=float)
    dphi0 = np.asarray(dphi0, dtype=float)
    if phi0.ndim == 1:
        phi0, dphi0 = phi0[:, None], dphi0[:, None]
    return _record(frame, member, phi0, dphi0, grid, tol, origin, shape_operator)


def n_jacobi(geodesic, S, J0, grid=None, member=0, tol=JACOBI_TOL) -> JacobiRecord:
    """N-Jacobi field: ``nabla J(0) = S(J0)`` for the chart matrix ``S`` of the shape operator."""
    S = np.asarray(S, dtype=float)
    J0 = np.asarray(J0, dtype=float)
    return integrate_jacobi(geodesic, J0, S @ J0, grid=grid, member=member, tol=tol,
                            origin="N-Jacobi", shape_operator=S)


# --------------------------------------------------------------------------- focal points


@dataclass
class FocalReport:
    frame: ParallelFrame = field(repr=False)
    times: np.ndarray = field(repr=False)
    det: np.ndarray = field(repr=False)
    focal_times: list
    none_found_up_to: float
    record: JacobiRecord | None = field(default=None, repr=False)


def focal_scan(frame: ParallelFrame, S_frame, member=0, spacing=1e-3, tol=JACOBI_TOL,
               xtol=1e-12) -> FocalReport:
    """Zeros of ``det M(t)`` for the ``n-1`` N-Jacobi fields ``phi(0) = e_a``, ``phi'(0) = Shat e_a``.

    ``S_frame`` is the ``(n-1) x (n-1)`` shape operator in the tangential part
    of the frame.  Sign changes are refined by Brent's method; grazing minima
    are refined on the smallest singular value and reported only when
    ``|det| < 1e-10 * scale``.
    """
    d = frame.metric.dim
    S_frame = np.atleast_2d(np.asarray(S_frame, dtype=float))
    phi0 = np.zeros((d, d - 1))
    dphi0 = np.zeros((d, d - 1))
    phi0[: d - 1] = np.eye(d - 1)
    dphi0[: d - 1] = S_frame
    n = max(201, int(np.ceil(abs(frame.T) / spacing)) + 1)
    rec = _record(frame, member, phi0, dphi0, np.linspace(0.0, frame.T, n), tol, "N-Jacobi", S_frame)
    ts = rec.grid
    M = rec.phi[:, : d - 1, :]
    det = np.linalg.det(M)
    scale = max(np.max(np.linalg.norm(M, axis=(1, 2))) ** (d - 1), 1e-300)

    def det_at(t):
        return float(np.linalg.det(rec.at(t)[0][: d - 1]))

    def smin(t):
        return float(np.linalg.svd(rec.at(t)[0][: d - 1], compute_uv=False)[-1])

    times = []
    for i in range(1, n):
        if det[i - 1] == 0.0:
            times.append(float(ts[i - 1]))
        elif det[i - 1] * det[i] < 0:
            times.append(brentq(det_at, ts[i - 1], ts[i], xtol=xtol, rtol=4 * np.finfo(float).eps))
    sv = np.linalg.svd(M, compute_uv=False)[:, -1]
    for i in range(1, n - 1):
        if sv[i] <= sv[i - 1] and sv[i] <= sv[i + 1]:
            if any(abs(ts[i] - t) < 2 * (ts[1] - ts[0]) for t in times):
                continue
            opt = minimize_scalar(smin, bounds=(ts[i - 1], ts[i + 1]), method="bounded",
                                  options={"xatol": xtol})
            if abs(det_at(opt.x)) < 1e-10 * scale:
                times.append(float(opt.x))
    times.sort()
    return FocalReport(frame, ts, det, times, float(times[0]) if times else float(frame.T), rec)


# --------------------------------------------------------------------------- index form


class FrameField:
    """A vector field along a geodesic given by frame components ``t -> (xi, xi')``."""

    def __init__(self, value):
        self.value = value

    def __add__(self, other):
        return FrameField(lambda t: tuple(a + b for a, b in zip(self.value(t), other.value(t))))

    @classmethod
    def polynomial_bump(cls, coeffs, s):
        """``xi(t) = sum_k c_k (1 - t/s) (t/s)^k``: vanishes at ``t = s``."""
        coeffs = np.asarray(coeffs, dtype=float)  # (K, d)

        def value(t):
            u = np.asarray(t, dtype=float) / s
            k = np.arange(len(coeffs))
            pw = u[..., None] ** k
            dpw = np.where(k > 0, k * u[..., None] ** np.maximum(k - 1, 0), 0.0) / s
            base = (1 - u)[..., None] * pw
            dbase = (1 - u)[..., None] * dpw - pw / s
            return base @ coeffs, dbase @ coeffs

        return cls(value)


@dataclass(frozen=True)
class IndexFormValue:
    t: float
    value: float
    boundary: float
    integral: float
    abserr: float


def index_form(S_frame, frame: ParallelFrame, X: FrameField, Y: FrameField, t, member=0,
               epsabs=1e-12, epsrel=1e-12) -> IndexFormValue:
    """``I_t(X, Y) = g_n(S X, Y)|_0 + int_0^t g(X', Y') - g(R X, Y) ds`` in frame components.

    ``S_frame`` is the shape operator on the tangential frame block (size
    ``n-1``) or the full ``n x n`` frame matrix.
    """
    d = frame.metric.dim
    S = np.zeros((d, d))
    S_frame = np.atleast_2d(np.asarray(S_frame, dtype=float))
    S[: S_frame.shape[0], : S_frame.shape[1]] = S_frame
    x0, _ = X.value(0.0)
    y0, _ = Y.value(0.0)
    boundary = float(y0 @ S @ x0)

    def integrand(s):
        xs, dxs = X.value(s)
        ys, dys = Y.value(s)
        R = frame.curvature(s)[member]
        return float(dxs @ dys - ys @ R @ xs)

    val, err, info, *rest = quad(integrand, 0.0, t, epsabs=epsabs, epsrel=epsrel, limit=400, full_output=1)
    if rest and err > 1e3 * max(epsabs, epsrel * abs(val)):
        raise QuadratureFailure(f"quadrature did not converge: {rest[0]}")
    return IndexFormValue(float(t), boundary + val, boundary, float(val), float(err))


# --------------------------------------------------------------------------- transplantation


@dataclass
class TransplantedField:
    """``Jbar = phi^a F_a`` along the target geodesic."""

    source: JacobiRecord
    target: ParallelFrame

    def chart(self, t=None):
        ts = self.source.grid if t is None else t
        phi, dphi = (self.source.phi, self.source.dphi) if t is None else self.source.at(t)
        F = self.target.frame(ts)[..., 0, :, :]
        return F @ phi, F @ dphi

    def chart_gram(self, t=None):
        ts = self.source.grid if t is None else t
        x, v, _ = self.target.state(ts)
        g = metric_tensor(self.target.metric, x[..., 0, :], v[..., 0, :])
        J, dJ = self.chart(t)
        vel = v[..., 0, :]
        return {
            "norm2": np.einsum("...ia,...ij,...ja->...a", J, g, J),
            "dnorm2": np.einsum("...ia,...ij,...ja->...a", dJ, g, dJ),
            "velocity": np.einsum("...ia,...ij,...j->...a", J, g, vel),
        }


def transplant(J: JacobiRecord, target: ParallelFrame) -> TransplantedField:
    """Carry ``J`` to ``target`` coefficient-wise in the parallel frames."""
    src = J.frame
    if abs(src.T - target.T) > 1e-12:
        raise SpanMismatch(f"spans differ: {src.T} vs {target.T}")
    for fr in (src, target):
        x, v, _ = fr.state(0.0)
        if abs(float(fr.metric.F(x[0], v[0])) - 1.0) > 1e-9:
            raise SpanMismatch("transplantation needs unit-speed geodesics")
    return TransplantedField(J, target)


def source_gram(J: JacobiRecord):
    """Same quantities as :meth:`TransplantedField.chart_gram` on the source side."""
    x, v, _ = J.frame.state(J.grid)
    xm, vm = x[:, J.member], v[:, J.member]
    g = metric_tensor(J.frame.metric, xm, vm)
    Jc, dJ = J.chart()
    return {
        "norm2": np.einsum("...ia,...ij,...ja->...a", Jc, g, Jc),
        "dnorm2": np.einsum("...ia,...ij,...ja->...a", dJ, g, dJ),
        "velocity": np.einsum("...ia,...ij,...j->...a", Jc, g, vm),
    }


# --------------------------------------------------------------------------- comparison


@dataclass
class ComparisonReport:
    grid: np.ndarray = field(repr=False)
    norm: np.ndarray = field(repr=False)
    norm_bar: np.ndarray = field(repr=False)
    min_margin: float
    holds: bool
    curvature_gap: float
    spectra_gap: float
    barred_focal: list
    eigen_verdict_gn: bool
    eigen_verdict_gtilde: bool
    witness: dict | None = None


def comparison_check(frame: ParallelFrame, spectrum, frame_bar: ParallelFrame, spectrum_bar,
                     initial=None, curvature_slack=1e-7, grid=None) -> ComparisonReport:
    """Jacobi-norm comparison for N-Jacobi fields with matched initial data.

    Shape operators are given by their eigenvalues on the tangential frame
    vectors ``E_1..E_{n-1}`` (and ``F_1..F_{n-1}`` on the barred side).  The
    hypotheses are verified first: flag curvature domination on transplanted
    flags along the grid, ``max spec(Sbar) <= min spec(S)`` and absence of
    focal points on the barred geodesic.
    """
    d = frame.metric.dim
    if abs(frame.T - frame_bar.T) > 1e-12:
        raise SpanMismatch("geodesic spans differ")
    lam = np.asarray(spectrum, dtype=float)
    lam_bar = np.asarray(spectrum_bar, dtype=float)
    ts = _grid(frame, grid)

    # At the foot the osculating metric g~ equals g_n, so eigenvalues (and the
    # quadratic-form extrema) agree in both metrics.
    gap = float(lam_bar.max() - lam.min())
    verdict = gap <= 0.0
    if not verdict:
        raise HypothesisViolated("max eigenvalue of Sbar exceeds min eigenvalue of S",
                                 {"max_bar": float(lam_bar.max()), "min": float(lam.min())})

    R = frame.curvature(ts)[:, 0, : d - 1, : d - 1]
    Rb = frame_bar.curvature(ts)[:, 0, : d - 1, : d - 1]
    diff = 0.5 * ((R - Rb) + np.swapaxes(R - Rb, 1, 2))
    worst = np.linalg.eigvalsh(diff)[:, -1]
    cgap = float(worst.max())
    if cgap > curvature_slack:
        i = int(np.argmax(worst))
        raise HypothesisViolated("flag curvature K exceeds Kbar on a transplanted flag",
                                 {"t": float(ts[i]), "excess": cgap})

    bar_focal = focal_scan(frame_bar, np.diag(lam_bar))
    if bar_focal.focal_times:
        raise HypothesisViolated("focal point on the barred geodesic",
                                 {"t": bar_focal.focal_times[0]})

    if initial is None:
        initial = np.eye(d - 1)
    A = np.zeros((d, np.shape(initial)[1]))
    A[: d - 1] = initial
    S = np.zeros((d, d))
    S[: d - 1, : d - 1] = np.diag(lam)
    Sb = np.zeros((d, d))
    Sb[: d - 1, : d - 1] = np.diag(lam_bar)
    J = _record(frame, 0, A, S @ A, ts, JACOBI_TOL, "N-Jacobi", S)
    Jb = _record(frame_bar, 0, A, Sb @ A, ts, JACOBI_TOL, "N-Jacobi", Sb)
    n = J.norm()
    nb = Jb.norm()
    margin = n**2 - nb**2
    i, a = np.unravel_index(np.argmin(margin), margin.shape)
    holds = bool(margin.min() >= -1e-9)
    witness = None if holds else {"t": float(ts[i]), "field": int(a), "margin": float(margin[i, a])}
    return ComparisonReport(ts, n, nb, float(margin.min()), holds, cgap, gap, [], verdict, verdict, witness)
