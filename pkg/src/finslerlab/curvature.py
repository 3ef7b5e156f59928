"""Fundamental tensor, spray, nonlinear connection and curvature.

All routines accept batches: ``x`` and ``y`` of shape ``(..., dim)``; tensor
outputs carry the batch axes first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import _check_point
from .errors import DegenerateFlag, SingularTensor, ZeroVector
from .jets import Jet, algebra, jet_solve

COND_LIMIT = 1e10


@dataclass(frozen=True)
class FundamentalTensor:
    base: np.ndarray
    reference: np.ndarray
    matrix: np.ndarray

    def __call__(self, u, v):
        return np.einsum("...i,...ij,...j->...", u, self.matrix, v)


@dataclass(frozen=True)
class SprayData:
    base: np.ndarray
    velocity: np.ndarray
    G: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class CurvatureOperator:
    base: np.ndarray
    reference: np.ndarray
    matrix: np.ndarray  # R^i_k, acting on column vectors

    def __call__(self, u):
        return np.einsum("...ik,...k->...i", self.matrix, u)


def _batch(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    return np.broadcast_to(x, shape), np.broadcast_to(y, shape)


def _to_back(a, nlead):
    """Move ``nlead`` leading tensor axes behind the batch axes."""
    return np.moveaxis(a, tuple(range(nlead)), tuple(range(-nlead, 0)))


def _check_condition(g0):
    """``g0`` has tensor axes first."""
    g = _to_back(g0, 2)
    if not np.all(np.isfinite(g)):
        raise SingularTensor("fundamental tensor is not finite")
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularTensor(f"fundamental tensor condition number {np.max(cond):.3g} exceeds {COND_LIMIT:g}")


def f2_jet(metric, x, y, order, y_only=False):
    """Taylor coefficients of ``F^2`` at ``(x, y)``: variables ``(x, y)`` or ``y`` only."""
    d = metric.dim
    nv = d if y_only else 2 * d
    alg = algebra(nv, order)
    eye = np.eye(nv)
    if y_only:
        xs = [x[..., i] for i in range(d)]
        ys = [Jet.variable(alg, y[..., i], eye[i]) for i in range(d)]
    else:
        xs = [Jet.variable(alg, x[..., i], eye[i]) for i in range(d)]
        ys = [Jet.variable(alg, y[..., i], eye[d + i]) for i in range(d)]
    e = metric.F2(xs, ys)
    if not isinstance(e, Jet):
        e = Jet.constant(alg, e)
    c = np.broadcast_to(e.c, (alg.size,) + x.shape[:-1])
    return alg, c


def metric_tensor(metric, x, y) -> np.ndarray:
    """``g_ij(x, y) = 1/2 d^2 F^2 / dy^i dy^j`` with shape ``(..., d, d)``."""
    x, y = _batch(x, y)
    d = metric.dim
    alg, c = f2_jet(metric, x, y, 2, y_only=True)
    g = np.empty(x.shape[:-1] + (d, d))
    for i in range(d):
        for j in range(i, d):
            alpha = [0] * d
            alpha[i] += 1
            alpha[j] += 1
            g[..., i, j] = g[..., j, i] = 0.5 * alg.derivative(c, alpha)
    return g


def fundamental_tensor(metric, x, y) -> FundamentalTensor:
    x, y = _check_point(metric, x, y)
    return FundamentalTensor(x, y, metric_tensor(metric, x, y))


def spray_jet(metric, x, y, order):
    """Geodesic coefficients ``G^i`` as a jet of ``order`` in ``(x, y)``.

    Returns the algebra, coefficients with shape ``(m, d, *batch)`` and the
    fundamental tensor ``(d, d, *batch)``.  Uses
    ``G^i = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})``.
    """
    x, y = _batch(x, y)
    d = metric.dim
    big, E = f2_jet(metric, x, y, order + 2)
    alg = algebra(2 * d, order)
    m = alg.size
    dE = [big.diff(E, v) for v in range(2 * d)]
    g = np.stack([np.stack([0.5 * big.diff(dE[d + i], d + j)[:m] for j in range(d)], 1) for i in range(d)], 1)
    _check_condition(g[0])
    eye = np.eye(2 * d)
    ycoef = [Jet.variable(alg, y[..., k], eye[d + k]).c for k in range(d)]
    rhs = []
    for l in range(d):
        acc = -dE[l][:m]
        for k in range(d):
            acc = acc + alg.mul(big.diff(dE[k], d + l)[:m], ycoef[k])
        rhs.append(acc)
    rhs = np.stack(rhs, 1)
    G = 0.25 * jet_solve(alg, g, rhs)
    return alg, G, g[0]


def geodesic_coefficients(metric, x, y) -> np.ndarray:
    """``G^i(x, y)`` only; the cheap path used by integrators."""
    _, G, _ = spray_jet(metric, x, y, 0)
    return _to_back(G[0], 1)


def _first(alg, G, d):
    """``dG^i/dx^k`` and ``dG^i/dy^k`` as ``(d, d, *batch)`` arrays (i, k)."""
    dx = np.stack([G[alg.unit(k)] for k in range(d)], 1)
    dy = np.stack([G[alg.unit(d + k)] for k in range(d)], 1)
    return dx, dy


def connection(metric, x, y):
    """``(G, N)`` with ``N^i_j = dG^i/dy^j``; batch axes first."""
    alg, G, _ = spray_jet(metric, x, y, 1)
    _, dy = _first(alg, G, metric.dim)
    return _to_back(G[0], 1), _to_back(dy, 2)


def spray(metric, x, y) -> SprayData:
    x, y = _check_point(metric, x, y)
    G, N = connection(metric, x, y)
    return SprayData(x, y, G, N)


def _second(alg, G, a, b):
    alpha = [0] * alg.nvars
    alpha[a] += 1
    alpha[b] += 1
    return alg.derivative(G, alpha)


def curvature_matrix(metric, x, y, with_parts=False):
    """``R^i_k(x, y)`` with shape ``(..., d, d)``."""
    x, y = _batch(x, y)
    d = metric.dim
    alg, G, g = spray_jet(metric, x, y, 2)
    G0 = G[0]
    Gx, Gy = _first(alg, G, d)
    Gxy = np.stack([np.stack([_second(alg, G, j, d + k) for k in range(d)], 1) for j in range(d)], 1)
    Gyy = np.stack([np.stack([_second(alg, G, d + j, d + k) for k in range(d)], 1) for j in range(d)], 1)
    yT = np.moveaxis(y, -1, 0)
    R = (
        2.0 * Gx
        - np.einsum("j...,ijk...->ik...", yT, Gxy)
        + 2.0 * np.einsum("j...,ijk...->ik...", G0, Gyy)
        - np.einsum("ij...,jk...->ik...", Gy, Gy)
    )
    R = _to_back(R, 2)
    if with_parts:
        return R, _to_back(g, 2), _to_back(G0, 1), _to_back(Gy, 2)
    return R


def riemann_curvature(metric, x, y) -> CurvatureOperator:
    x, y = _check_point(metric, x, y)
    return CurvatureOperator(x, y, curvature_matrix(metric, x, y))


def _bilinear(g, u, v):
    return np.einsum("...i,...ij,...j->...", u, g, v)


def flag_curvature(metric, x, y=None, u=None):
    """``K(P, y)`` for ``P = span{y, u}``; accepts a :class:`~finslerlab.core.Flag`."""
    if u is None:
        flag = x
        x, y, u = flag.base.coords, flag.pole.components, flag.transverse.components
    x, y = _check_point(metric, x, y)
    u = np.broadcast_to(np.asarray(u, dtype=float), np.broadcast_shapes(np.shape(u), y.shape))
    R, g, _, _ = curvature_matrix(metric, x, y, with_parts=True)
    Ru = np.einsum("...ik,...k->...i", R, u)
    den = _bilinear(g, y, y) * _bilinear(g, u, u) - _bilinear(g, y, u) ** 2
    if np.any(den < 1e-12):
        raise DegenerateFlag("pole and transverse vectors are (nearly) dependent")
    K = _bilinear(g, Ru, u) / den
    return float(K) if np.ndim(K) == 0 else K


def chern_derivative(metric, positions, U, dU, reference):
    """``(nabla U)^i = dU^i/dt + U^j N^i_j(c, reference)`` sampled along a curve.

    ``positions``, ``U``, ``dU`` and ``reference`` are arrays ``(n, d)``; ``dU``
    holds the coordinate derivative of the components.
    """
    reference = np.asarray(reference, dtype=float)
    if np.any(np.linalg.norm(reference, axis=-1) == 0.0):
        raise ZeroVector("reference vector vanishes along the curve")
    _, N = connection(metric, positions, reference)
    return np.asarray(dU) + np.einsum("...ij,...j->...i", N, U)


def g_orthonormal_frame(g: np.ndarray, first: np.ndarray, last: bool = True) -> np.ndarray:
    """A ``g``-orthonormal basis (as columns) containing ``first/|first|_g``.

    ``first`` becomes the last column if ``last`` else the first one.
    """
    d = g.shape[-1]
    vecs = [first] + [e for e in np.eye(d)]
    basis = []
    for v in vecs:
        w = v.astype(float).copy()
        for b in basis:
            w = w - (b @ g @ w) * b
        n = np.sqrt(w @ g @ w)
        if n > 1e-8:
            basis.append(w / n)
        if len(basis) == d:
            break
    basis = np.array(basis).T
    if last:
        basis = np.roll(basis, -1, axis=1)
    return basis


def metric_derivatives(metric, x, y):
    """``g``, ``dg/dx`` and the Cartan tensor at ``(x, y)``.

    Returns ``g[..., i, j]``, ``dgx[..., i, j, m] = d g_ij / dx^m`` and
    ``C[..., i, j, l] = 1/4 d^3 F^2 / dy^i dy^j dy^l``.
    """
    x, y = _batch(x, y)
    d = metric.dim
    alg, c = f2_jet(metric, x, y, 3)
    shape = x.shape[:-1]
    g = np.empty(shape + (d, d))
    dgx = np.empty(shape + (d, d, d))
    C = np.empty(shape + (d, d, d))

    def part(*vars_):
        alpha = [0] * (2 * d)
        for v in vars_:
            alpha[v] += 1
        return alg.derivative(c, alpha)

    for i in range(d):
        for j in range(d):
            g[..., i, j] = 0.5 * part(d + i, d + j)
            for m in range(d):
                dgx[..., i, j, m] = 0.5 * part(d + i, d + j, m)
                C[..., i, j, m] = 0.25 * part(d + i, d + j, d + m)
    return g, dgx, C


def christoffel_first_kind(dg):
    """``Gamma_ljk = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)`` from ``dg[..., i, j, m] = d_m g_ij``."""
    return 0.5 * (np.einsum("...lkj->...ljk", dg) + dg - np.einsum("...jkl->...ljk", dg))
