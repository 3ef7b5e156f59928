"""Concrete Finsler metrics of Randers type ``F = sqrt(a(x)(y,y)) + b(x).y``.

Every shipped metric is a special case: Euclidean and hyperbolic have no
``b``; the Minkowski-Randers norm has a flat ``a`` and constant ``b``.  The
same formula is evaluated on floats, arrays and jets.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .core import ChartDomain
from .errors import InvalidRanders


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """An evaluable Finsler metric on a single global chart.

    ``a_field(xs)`` returns either a conformal factor (``conformal=True``,
    meaning ``a_ij = phi(x) delta_ij``) or a nested ``dim x dim`` list.
    ``b_field(xs)`` returns the covector components.  ``None`` means the flat
    quadratic form, respectively no drift term.
    """

    dim: int
    chart: ChartDomain
    family: str
    params: dict = field(default_factory=dict)
    a_field: Callable | None = None
    b_field: Callable | None = None
    conformal: bool = False
    name: str = ""
    # maps a metric distance from the chart origin to a chart radius
    radial_chart_radius: Callable | None = None

    @property
    def reversible(self) -> bool:
        return self.b_field is None

    @property
    def riemannian(self) -> bool:
        return self.b_field is None

    def alpha2(self, xs, ys):
        d = self.dim
        if self.a_field is None:
            return _sum(ys[i] * ys[i] for i in range(d))
        if self.conformal:
            return self.a_field(xs) * _sum(ys[i] * ys[i] for i in range(d))
        a = self.a_field(xs)
        total = 0.0
        for i in range(d):
            total = total + a[i][i] * ys[i] * ys[i]
            for j in range(i + 1, d):
                if not _is_zero(a[i][j]):
                    total = total + 2.0 * a[i][j] * ys[i] * ys[j]
        return total

    def F2(self, xs, ys):
        """``F^2`` on component lists (floats, arrays or jets)."""
        alpha2 = self.alpha2(xs, ys)
        if self.b_field is None:
            return alpha2
        b = self.b_field(xs)
        beta = _sum(b[i] * ys[i] for i in range(self.dim) if not _is_zero(b[i]))
        f = jets.sqrt(alpha2) + beta
        return f * f

    def F(self, x, y) -> np.ndarray:
        """Vectorised ``F(x, y)`` for arrays with coordinates on the last axis."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xs = [x[..., i] for i in range(self.dim)]
        ys = [y[..., i] for i in range(self.dim)]
        return np.sqrt(np.maximum(self.F2(xs, ys), 0.0))

    def a_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xs = [x[..., i] for i in range(self.dim)]
        eye = np.eye(self.dim)
        if self.a_field is None:
            return np.broadcast_to(eye, x.shape[:-1] + eye.shape).copy()
        if self.conformal:
            return np.asarray(self.a_field(xs))[..., None, None] * eye
        a = self.a_field(xs)
        return np.stack([np.stack(np.broadcast_arrays(*row), -1) for row in a], -2)

    def b_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.b_field is None:
            return np.zeros(x.shape)
        xs = [x[..., i] for i in range(self.dim)]
        b = self.b_field(xs)
        return np.stack(np.broadcast_arrays(*[np.asarray(bi, float) + 0 * xs[0] for bi in b]), -1)

    def __repr__(self):
        return f"MetricSpec({self.name or self.family}, dim={self.dim})"


def _sum(terms):
    total = 0.0
    for t in terms:
        total = t + total
    return total


def _is_zero(v):
    return isinstance(v, (int, float)) and v == 0


def _check_dim(dim):
    if not 2 <= dim <= 4:
        raise ValueError(f"dimension must be 2..4, got {dim}")


def make_euclidean(dim: int = 2) -> MetricSpec:
    _check_dim(dim)
    return MetricSpec(
        dim=dim,
        chart=ChartDomain.all_space(),
        family="euclidean",
        params={"dim": dim},
        name="euclidean",
        radial_chart_radius=lambda r: r,
    )


def _poincare_factor(k):
    def phi(xs):
        r2 = _sum(x * x for x in xs)
        lam = 2.0 / (k * (1.0 - r2))
        return lam * lam

    return phi


def _poincare_radius(k):
    return lambda r: math.tanh(k * r / 2.0)


def make_hyperbolic(dim: int = 2, k: float = 1.0) -> MetricSpec:
    """Poincare ball with constant sectional curvature ``-k^2``."""
    _check_dim(dim)
    if k <= 0:
        raise ValueError("k must be positive")
    return MetricSpec(
        dim=dim,
        chart=ChartDomain.open_ball(np.zeros(dim), 1.0, margin=2e-3),
        family="hyperbolic",
        params={"dim": dim, "k": k},
        a_field=_poincare_factor(k),
        conformal=True,
        name=f"hyperbolic:k={k:g}",
        radial_chart_radius=_poincare_radius(k),
    )


def make_riemannian(dim, a_field, chart=None, conformal=False, name="riemannian", samples=64, seed=0):
    """A Riemannian metric from a closed-form tensor field ``a_ij(x)``."""
    _check_dim(dim)
    chart = chart or ChartDomain.all_space()
    metric = MetricSpec(dim=dim, chart=chart, family="riemannian", a_field=a_field,
                        conformal=conformal, name=name)
    _validate(metric, samples, seed)
    return metric


def make_minkowski_randers(dim: int = 2, b=(0.3, 0.0)) -> MetricSpec:
    """``F(y) = |y| + b.y`` with constant ``b``; flat and Berwald, non-reversible for ``b != 0``."""
    _check_dim(dim)
    b = _pad(np.atleast_1d(np.asarray(b, dtype=float)), dim)
    if np.linalg.norm(b) >= 1.0:
        raise InvalidRanders(f"|b| = {np.linalg.norm(b):.4g} must be < 1")
    bl = [float(v) for v in b]
    return MetricSpec(
        dim=dim,
        chart=ChartDomain.all_space(),
        family="minkowski-randers",
        params={"dim": dim, "b": bl},
        b_field=lambda xs: bl,
        name="minkowski-randers:b=" + ",".join(f"{v:g}" for v in bl),
        radial_chart_radius=lambda r: r,
    )


def _pad(b, dim):
    if len(b) > dim:
        raise ValueError(f"covector has {len(b)} components for dimension {dim}")
    out = np.zeros(dim)
    out[: len(b)] = b
    return out


def make_randers(dim, a_field, b_field, chart=None, conformal=False, name="randers",
                 samples=64, seed=0, radial_chart_radius=None, params=None) -> MetricSpec:
    """``F = sqrt(a(y,y)) + b.y``; validated for positivity and ``|b|_a < 1`` on chart samples."""
    _check_dim(dim)
    metric = MetricSpec(
        dim=dim,
        chart=chart or ChartDomain.all_space(),
        family="randers",
        params=params or {},
        a_field=a_field,
        b_field=b_field,
        conformal=conformal,
        name=name,
        radial_chart_radius=radial_chart_radius,
    )
    _validate(metric, samples, seed)
    return metric


def make_hyperbolic_randers(dim: int = 2, k: float = 1.0, eps: float = 0.05) -> MetricSpec:
    """Hyperbolic ``a`` plus the closed drift ``b = eps dx^1``: non-Berwald with small T."""
    bl = [float(eps)] + [0.0] * (dim - 1)
    return make_randers(
        dim,
        _poincare_factor(k),
        lambda xs: bl,
        chart=ChartDomain.open_ball(np.zeros(dim), 1.0, margin=2e-3),
        conformal=True,
        name=f"hyperbolic-randers:k={k:g},eps={eps:g}",
        radial_chart_radius=_poincare_radius(k),
        params={"dim": dim, "k": k, "eps": eps},
    )


def sample_chart(chart: ChartDomain, dim: int, n: int, rng, fraction: float = 0.9) -> np.ndarray:
    """Uniform points in the chart, shrunk by ``fraction`` (unit box for all-space)."""
    if chart.kind == "open-ball":
        v = rng.normal(size=(n, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = chart.radius * fraction * rng.uniform(size=(n, 1)) ** (1.0 / dim)
        return np.asarray(chart.center) + r * v
    if chart.kind == "box":
        lo, hi = np.asarray(chart.lo), np.asarray(chart.hi)
        mid, half = (lo + hi) / 2, (hi - lo) / 2 * fraction
        return mid + half * rng.uniform(-1, 1, size=(n, dim))
    return rng.uniform(-1, 1, size=(n, dim))


def _validate(metric: MetricSpec, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    x = sample_chart(metric.chart, metric.dim, samples, rng)
    a = metric.a_matrix(x)
    eig = np.linalg.eigvalsh(a)
    if np.any(eig <= 0):
        raise InvalidRanders("a is not positive definite on the chart")
    if metric.b_field is not None:
        b = metric.b_vector(x)
        bnorm = np.sqrt(np.einsum("...i,...ij,...j->...", b, np.linalg.inv(a), b))
        if np.any(bnorm >= 1.0):
            raise InvalidRanders(f"|b|_a reaches {bnorm.max():.4g} >= 1")


_PARAM = re.compile(r"(\w+)=([^=]+?)(?=,\w+=|$)")


def parse_preset(text: str) -> tuple[str, dict]:
    """Split ``"name:key=v,key=v1,v2"`` into the name and a parameter dict."""
    name, _, rest = text.partition(":")
    params = {}
    for key, value in _PARAM.findall(rest):
        parts = [float(p) for p in value.split(",")]
        params[key] = parts[0] if len(parts) == 1 else parts
    return name.strip(), params


def metric_from_name(text: str, dim: int | None = None) -> MetricSpec:
    """Build a preset such as ``"hyperbolic-randers:k=1,eps=0.05"``."""
    name, p = parse_preset(text)
    dim = int(p.pop("dim", dim or 2))
    if name == "euclidean":
        return make_euclidean(dim)
    if name == "hyperbolic":
        return make_hyperbolic(dim, float(p.get("k", 1.0)))
    if name == "minkowski-randers":
        b = p.get("b", [0.3, 0.0])
        return make_minkowski_randers(dim, np.atleast_1d(b))
    if name == "hyperbolic-randers":
        return make_hyperbolic_randers(dim, float(p.get("k", 1.0)), float(p.get("eps", 0.05)))
    raise ValueError(f"unknown metric preset {text!r}")


@dataclass(frozen=True)
class MetricClassification:
    is_riemannian: bool
    is_berwald: bool
    berwald_residual: float
    riemannian_residual: float
    tol: float


def classify(metric: MetricSpec, samples=None, n=32, rng=None, tol=1e-9, directions=24) -> MetricClassification:
    """Berwald / Riemannian test by least-squares quadratic fits of ``G(x, .)``.

    At every sample point the spray is evaluated on ``directions`` unit
    vectors (and their negatives) and fitted by ``Q^i_jk y^j y^k``; the
    residual is scaled by ``max(1, max |G|)``.  Riemannian means ``g_y`` does
    not depend on ``y``.
    """
    from .curvature import geodesic_coefficients, metric_tensor

    rng = np.random.default_rng(0) if rng is None else rng
    d = metric.dim
    x = sample_chart(metric.chart, d, n, rng) if samples is None else np.atleast_2d(np.asarray(samples, float))
    if len(x) < 20:
        raise ValueError("classification needs at least 20 sample points")
    ys = rng.normal(size=(directions, d))
    ys /= np.linalg.norm(ys, axis=1, keepdims=True)
    ys = np.concatenate([ys, -ys])
    jj, kk = np.triu_indices(d)
    A = ys[:, jj] * ys[:, kk]  # (q, monomials)
    X = np.repeat(x, len(ys), axis=0)
    Y = np.tile(ys, (len(x), 1))
    G = geodesic_coefficients(metric, X, Y).reshape(len(x), len(ys), d)
    coef, *_ = np.linalg.lstsq(A, np.moveaxis(G, 1, 0).reshape(len(ys), -1), rcond=None)
    fit = np.moveaxis((A @ coef).reshape(len(ys), len(x), d), 0, 1)
    scale = np.maximum(1.0, np.abs(G).max(axis=(1, 2)))
    berwald = float((np.abs(G - fit).max(axis=(1, 2)) / scale).max())
    g = metric_tensor(metric, X, Y).reshape(len(x), len(ys), d, d)
    gscale = np.maximum(1.0, np.abs(g).max(axis=(1, 2, 3)))
    riem = float((np.abs(g - g[:, :1]).max(axis=(1, 2, 3)) / gscale).max())
    is_riem = riem < tol
    return MetricClassification(is_riem, is_riem or berwald < tol, berwald, riem, tol)
