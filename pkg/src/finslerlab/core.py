"""Geometric value types, chart domains and the differentiation front-end."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EvaluationOutsideDomain, UnsupportedOrder, ZeroVector
from .jets import Jet, algebra

MAX_ORDER = 4


@dataclass(frozen=True)
class ChartDomain:
    """The coordinate region on which a metric is defined.

    ``kind`` is ``"all-space"``, ``"open-ball"`` or ``"box"``.  ``margin`` is
    the safety shrink integrators keep from the boundary.
    """

    kind: str = "all-space"
    center: tuple = ()
    radius: float = math.inf
    lo: tuple = ()
    hi: tuple = ()
    margin: float = 1e-2

    @classmethod
    def all_space(cls, margin=1e-2):
        return cls("all-space", margin=margin)

    @classmethod
    def open_ball(cls, center, radius, margin=1e-2):
        return cls("open-ball", center=tuple(map(float, center)), radius=float(radius), margin=margin)

    @classmethod
    def box(cls, lo, hi, margin=1e-2):
        return cls("box", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)), margin=margin)

    def clearance(self, x) -> np.ndarray:
        """Signed distance to the boundary (positive inside), batch over leading axes."""
        x = np.asarray(x, dtype=float)
        if self.kind == "all-space":
            return np.full(x.shape[:-1], np.inf)
        if self.kind == "open-ball":
            return self.radius - np.linalg.norm(x - np.asarray(self.center), axis=-1)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.minimum(x - lo, hi - x).min(axis=-1)

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        return self.clearance(x) > margin


@dataclass(frozen=True)
class Point:
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))

    @property
    def dim(self):
        return self.coords.shape[-1]

    def __array__(self, dtype=None):
        return self.coords if dtype is None else self.coords.astype(dtype)


@dataclass(frozen=True)
class TangentVector:
    base: Point
    components: np.ndarray

    def __post_init__(self):
        base = self.base if isinstance(self.base, Point) else Point(self.base)
        object.__setattr__(self, "base", base)
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != base.coords.shape:
            raise ValueError("tangent vector and base point differ in dimension")
        object.__setattr__(self, "components", comps)

    def __array__(self, dtype=None):
        return self.components if dtype is None else self.components.astype(dtype)


@dataclass(frozen=True)
class Flag:
    """A 2-plane ``span{pole, transverse}`` with the pole singled out."""

    base: Point
    pole: TangentVector
    transverse: TangentVector

    def __post_init__(self):
        p, u = self.pole.components, self.transverse.components
        if np.linalg.matrix_rank(np.stack([p, u]), tol=1e-12 * max(1.0, np.abs(p).max())) < 2:
            raise ValueError("flag vectors are linearly dependent")


@dataclass
class JetValue:
    """``F^2`` and its partials along a set of seed directions.

    ``seeds`` has shape ``(m, 2*dim)``: each row moves ``x`` (first half) and
    ``y`` (second half) simultaneously.
    """

    value: float
    seeds: np.ndarray
    order: int
    coefficients: np.ndarray = field(repr=False)

    def partial(self, *which: int) -> float:
        """Mixed partial along the listed seed indices (order-insensitive)."""
        if len(which) > self.order:
            raise UnsupportedOrder(f"jet holds derivatives up to order {self.order}")
        alg = algebra(len(self.seeds), self.order)
        alpha = [0] * len(self.seeds)
        for w in which:
            alpha[w] += 1
        return float(alg.derivative(self.coefficients, alpha))

    def derivatives(self, order: int) -> np.ndarray:
        """Full symmetric tensor of ``order``-th partials."""
        m = len(self.seeds)
        out = np.empty((m,) * order)
        for idx in itertools.product(range(m), repeat=order):
            out[idx] = self.partial(*idx)
        return out


def _check_point(metric, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != metric.dim or y.shape[-1] != metric.dim:
        raise ValueError(f"expected {metric.dim}-dimensional coordinates")
    if not np.all(metric.chart.contains(x)):
        raise EvaluationOutsideDomain(f"point {x} lies outside the chart")
    if np.any(np.linalg.norm(y, axis=-1) == 0.0):
        raise ZeroVector("y must be nonzero")
    return x, y


def _default_seeds(dim):
    return np.eye(2 * dim)


def evaluate_jet(metric, x, y, seeds: Sequence | None = None, order: int = 2) -> JetValue:
    """Exact partials of ``F^2(x, y)`` along ``seeds`` up to ``order``."""
    if not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrder(f"order must be in 1..{MAX_ORDER}, got {order}")
    x, y = _check_point(metric, x, y)
    seeds = _default_seeds(metric.dim) if seeds is None else np.atleast_2d(np.asarray(seeds, float))
    d = metric.dim
    alg = algebra(len(seeds), order)
    xs = [Jet.variable(alg, x[i], seeds[:, i]) for i in range(d)]
    ys = [Jet.variable(alg, y[i], seeds[:, d + i]) for i in range(d)]
    e = metric.F2(xs, ys)
    return JetValue(float(e.c[0]), seeds, order, e.c)


def _central_weights(deriv: int, accuracy: int = 6) -> dict:
    """Central finite-difference weights via the moment (Vandermonde) system."""
    half = (deriv - 1) // 2 + accuracy // 2
    offsets = np.arange(-half, half + 1)
    A = np.vander(offsets.astype(float), increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[deriv] = math.factorial(deriv)
    w = np.linalg.solve(A, rhs)
    return {int(o): float(c) for o, c in zip(offsets, w) if abs(c) > 1e-14}


_FD_WEIGHTS = {k: _central_weights(k) for k in range(1, MAX_ORDER + 1)}

_DEFAULT_STEP = {1: 1e-3, 2: 1e-3, 3: 1e-2, 4: 2e-2}


def finite_difference_oracle(metric, x, y, seeds=None, order: int = 2, step: float | None = None) -> JetValue:
    """Partials of ``F^2`` by tensor-product central differences (test oracle).

    Shares no code with the jet path beyond evaluating ``F^2`` on floats.
    ``step`` defaults to a per-order value balancing truncation and roundoff.
    """
    if not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrder(f"order must be in 1..{MAX_ORDER}, got {order}")
    x, y = _check_point(metric, x, y)
    seeds = _default_seeds(metric.dim) if seeds is None else np.atleast_2d(np.asarray(seeds, float))
    m, d = len(seeds), metric.dim
    z0 = np.concatenate([x, y])

    def f(t):
        z = z0 + t @ seeds
        return float(metric.F2(list(z[:d]), list(z[d:])))

    alg = algebra(m, order)
    coeffs = np.zeros(alg.size)
    for k, alpha in enumerate(alg.index):
        deg = sum(alpha)
        if deg == 0:
            coeffs[k] = f(np.zeros(m))
            continue
        h = step if step is not None else _DEFAULT_STEP[deg]
        stencils = [list(_FD_WEIGHTS[a].items()) for a in alpha if a]
        axes = [v for v, a in enumerate(alpha) if a]
        total = 0.0
        for combo in itertools.product(*stencils):
            t = np.zeros(m)
            w = 1.0
            for v, (off, wt) in zip(axes, combo):
                t[v] = off * h
                w *= wt
            total += w * f(t)
        coeffs[k] = total / h**deg / alg.factorial[k]
    return JetValue(coeffs[0], seeds, order, coeffs)
