"""Geodesics, the exponential map and parallel frames.

Everything is integrated as one batched system with scipy's Dormand-Prince
5(4) pair (quartic dense output).  A batch of ``B`` geodesics shares the step
size, which keeps the per-step cost at one vectorised spray evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .core import _check_point
from .curvature import (
    connection,
    curvature_matrix,
    geodesic_coefficients,
    metric_tensor,
)
from .errors import DomainExit, IntegrationFailure

RTOL = 1e-10
ATOL = 1e-10


class Flow:
    """Dense solution of ``x' = v, v' = -2G(x, v)`` (and optionally ``E' = -N E``)."""

    def __init__(self, metric, sol, batch, with_frame, t0, t1):
        self.metric = metric
        self.sol = sol
        self.batch = batch
        self.with_frame = with_frame
        self.t0 = t0
        self.t1 = t1

    def state(self, t):
        """``(x, v, E)``; leading axis over ``t`` when ``t`` is an array."""
        scalar = np.ndim(t) == 0
        vals = self.sol(np.atleast_1d(t)).T
        nt, d, B = vals.shape[0], self.metric.dim, self.batch
        x = vals[:, : B * d].reshape(nt, B, d)
        v = vals[:, B * d: 2 * B * d].reshape(nt, B, d)
        E = vals[:, 2 * B * d:].reshape(nt, B, d, d) if self.with_frame else None
        if scalar:
            x, v = x[0], v[0]
            E = E[0] if E is not None else None
        return x, v, E


def _flow(metric, x0, v0, T, E0=None, rtol=RTOL, atol=ATOL, t0=0.0, max_step=np.inf):
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    B, d = x0.shape
    with_frame = E0 is not None
    n = B * d

    def rhs(t, s):
        x = s[:n].reshape(B, d)
        v = s[n: 2 * n].reshape(B, d)
        if with_frame:
            G, N = connection(metric, x, v)
            E = s[2 * n:].reshape(B, d, d)
            dE = -np.einsum("bij,bja->bia", N, E)
            return np.concatenate([v.ravel(), (-2.0 * G).ravel(), dE.ravel()])
        G = geodesic_coefficients(metric, x, v)
        return np.concatenate([v.ravel(), (-2.0 * G).ravel()])

    s0 = [x0.ravel(), v0.ravel()]
    if with_frame:
        s0.append(np.asarray(E0, dtype=float).reshape(B, d, d).ravel())
    s0 = np.concatenate(s0)

    events = None
    chart = metric.chart
    if chart.kind != "all-space":
        def leave(t, s):
            return float(np.min(chart.clearance(s[:n].reshape(B, d)))) - chart.margin

        leave.terminal = True
        leave.direction = -1
        events = leave

    try:
        res = solve_ivp(rhs, (t0, t0 + T), s0, method="RK45", rtol=rtol, atol=atol,
                        dense_output=True, events=events, max_step=max_step)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise IntegrationFailure(str(exc)) from exc
    if res.status == -1:
        raise IntegrationFailure(res.message)
    flow = Flow(metric, res.sol, B, with_frame, t0, res.t[-1])
    if res.status == 1:
        err = DomainExit(f"geodesic reached the chart margin at t={res.t[-1]:.6g}", res.t[-1])
        err.flow = flow
        raise err
    return flow


@dataclass
class GeodesicPath:
    """A geodesic ``c`` on ``[0, T]`` with dense interpolation."""

    metric: object
    x0: np.ndarray
    y0: np.ndarray
    T: float
    flow: Flow = field(repr=False)
    unit_speed: bool = False

    def position(self, t):
        return self.flow.state(t)[0][..., 0, :]

    def velocity(self, t):
        return self.flow.state(t)[1][..., 0, :]

    @property
    def end(self):
        return self.position(self.T)

    def speed(self, t):
        return self.metric.F(self.position(t), self.velocity(t))

    def residual(self, t, h=1e-4):
        """``|c'' + 2G(c, c')|`` with ``c''`` from central differences of the interpolant."""
        t = np.atleast_1d(t)
        acc = (self.velocity(t + h) - self.velocity(t - h)) / (2 * h)
        G = geodesic_coefficients(self.metric, self.position(t), self.velocity(t))
        return np.linalg.norm(acc + 2.0 * G, axis=-1)


def integrate_geodesic(metric, x0, y0, T, tol=RTOL) -> GeodesicPath:
    """Solve the geodesic equation from ``(x0, y0)`` on ``[0, T]``.

    Raises :class:`DomainExit` (with the exit time and the partial ``flow``)
    when the path reaches the chart margin.
    """
    x0, y0 = _check_point(metric, x0, y0)
    flow = _flow(metric, x0, y0, T, rtol=tol, atol=tol)
    unit = abs(float(metric.F(x0, y0)) - 1.0) < 1e-12
    return GeodesicPath(metric, x0, y0, float(T), flow, unit)


def exponential_map(metric, x, y, tol=RTOL) -> np.ndarray:
    return integrate_geodesic(metric, x, y, 1.0, tol=tol).end


def exponential_map_batch(metric, x, y, t=1.0, tol=RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints and end velocities for a batch ``x, y`` of shape ``(B, d)``."""
    flow = _flow(metric, x, y, t, rtol=tol, atol=tol)
    xe, ve, _ = flow.state(t)
    return xe, ve


class ParallelFrame:
    """A geodesic together with a parallel frame ``E_1..E_n`` (``E_n`` the unit velocity).

    Frames are stored as matrices whose columns are the frame vectors.  The
    curvature in the frame, ``E^{-1} R_{c'} E``, is tabulated and splined.
    """

    def __init__(self, metric, flow: Flow, T, spacing=5e-3):
        self.metric = metric
        self.flow = flow
        self.T = float(T)
        self.batch = flow.batch
        self._spacing = spacing
        self._curv = None

    def state(self, t):
        return self.flow.state(t)

    def frame(self, t):
        return self.flow.state(t)[2]

    def gram(self, t):
        """``g_{c'}(E_a, E_b)``; identity up to integration error."""
        x, v, E = self.flow.state(t)
        g = metric_tensor(self.metric, x, v)
        return np.einsum("...ia,...ij,...jb->...ab", E, g, E)

    def _tabulate(self):
        n = max(65, int(np.ceil(abs(self.T) / self._spacing)) + 1)
        ts = np.linspace(0.0, self.T, n)
        x, v, E = self.flow.state(ts)
        R = np.empty(x.shape[:2] + (self.metric.dim,) * 2)
        chunk = max(1, 4000 // self.batch)
        for i in range(0, n, chunk):
            R[i: i + chunk] = curvature_matrix(self.metric, x[i: i + chunk], v[i: i + chunk])
        Rhat = np.linalg.solve(E, np.einsum("...ij,...ja->...ia", R, E))
        self._curv = CubicSpline(ts, Rhat, axis=0)

    def curvature(self, t):
        """Frame matrix of ``R_{c'}``: shape ``(..., B, d, d)``."""
        if self._curv is None:
            self._tabulate()
        return self._curv(t)


def default_frame(metric, x, v, first=None):
    """``g_v``-orthonormal frame with last column ``v / F(v)``.

    ``first`` optionally supplies vectors (columns) to orthonormalise before
    the coordinate axes, so ``E_1..E_{n-1}`` can be aligned with a surface.
    """
    g = metric_tensor(metric, x, v)
    d = metric.dim
    vecs = [v / float(metric.F(x, v))]
    if first is not None:
        vecs += list(np.asarray(first, dtype=float).T)
    vecs += list(np.eye(d))
    basis = []
    for w in vecs:
        w = w.copy()
        for b in basis:
            w = w - (b @ g @ w) * b
        nrm = np.sqrt(w @ g @ w)
        if nrm > 1e-8:
            basis.append(w / nrm)
        if len(basis) == d:
            break
    E = np.array(basis).T
    return np.roll(E, -1, axis=1)


def parallel_frame(metric, geodesic, initial_frame=None, tol=RTOL) -> ParallelFrame:
    """Transport a ``g_{c'(0)}``-orthonormal frame with ``E_n = c'(0)`` along ``geodesic``.

    ``geodesic`` is a :class:`GeodesicPath` or a tuple ``(x0, y0, T)``; batches
    are accepted as ``(B, d)`` arrays with frames ``(B, d, d)``.
    """
    if isinstance(geodesic, GeodesicPath):
        x0, y0, T = geodesic.x0, geodesic.y0, geodesic.T
    else:
        x0, y0, T = geodesic
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    if initial_frame is None:
        E0 = np.stack([default_frame(metric, a, b) for a, b in zip(x0, y0)])
    else:
        E0 = np.asarray(initial_frame, dtype=float).reshape(len(x0), metric.dim, metric.dim)
        gram = np.einsum("bia,bij,bjc->bac", E0, metric_tensor(metric, x0, y0), E0)
        if np.max(np.abs(gram - np.eye(metric.dim))) > 1e-8:
            raise ValueError("initial frame is not g-orthonormal")
        speed = metric.F(x0, y0)[:, None]
        if np.max(np.abs(E0[:, :, -1] - y0 / speed)) > 1e-8:
            raise ValueError("last frame vector must be the unit initial velocity")
    flow = _flow(metric, x0, y0, T, E0=E0, rtol=tol, atol=tol)
    return ParallelFrame(metric, flow, T)
