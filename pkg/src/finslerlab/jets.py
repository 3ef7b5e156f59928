"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` carries the Taylor coefficients of a smooth function of
``nvars`` seed variables up to total degree ``order``.  Coefficients live on
axis 0; every further axis is a broadcastable batch axis, so a single jet can
hold the expansion at many base points at once.

Storing Taylor coefficients (``f_alpha / alpha!``) turns the product rule into
a plain convolution over multi-indices.  This is the same algebra as a tower of
nested dual numbers, flattened so that mixed partials are stored once.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


class JetAlgebra:
    """Index bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        index = []
        for deg in range(order + 1):
            # graded: an algebra of lower order is a prefix of this one
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                index.append(tuple(alpha))
        self.index = index
        self.size = len(index)
        self.pos = {alpha: i for i, alpha in enumerate(index)}
        self.degree = np.array([sum(a) for a in index])
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in a) for a in index], dtype=float
        )
        self.prefix = {d: int(np.sum(self.degree <= d)) for d in range(order + 1)}

        pairs = []
        for i, a in enumerate(index):
            for j, b in enumerate(index):
                if sum(a) + sum(b) <= order:
                    k = self.pos[tuple(p + q for p, q in zip(a, b))]
                    pairs.append((k, i, j))
        pairs.sort()
        pairs = np.array(pairs)
        self._left = pairs[:, 1]
        self._right = pairs[:, 2]
        # every target k has at least the pair (0, k)
        self._starts = np.searchsorted(pairs[:, 0], np.arange(self.size))

        self._diff = []
        for v in range(nvars):
            src, dst, fac = [], [], []
            for i, a in enumerate(index):
                if sum(a) < order:
                    b = list(a)
                    b[v] += 1
                    src.append(self.pos[tuple(b)])
                    dst.append(i)
                    fac.append(b[v])
            self._diff.append((np.array(src), np.array(dst), np.array(fac, float)))

    def __repr__(self):
        return f"JetAlgebra(nvars={self.nvars}, order={self.order})"

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a, b = _align(a, b)
        prod = a[self._left] * b[self._right]
        return np.add.reduceat(prod, self._starts, axis=0)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Product of jet matrices ``(m, i, j, ...) x (m, j, k, ...)``."""
        prod = np.einsum("pij...,pjk...->pik...", a[self._left], b[self._right])
        return np.add.reduceat(prod, self._starts, axis=0)

    def matvec(self, a: np.ndarray, v: np.ndarray) -> np.ndarray:
        prod = np.einsum("pij...,pj...->pi...", a[self._left], v[self._right])
        return np.add.reduceat(prod, self._starts, axis=0)

    def diff(self, c: np.ndarray, var: int) -> np.ndarray:
        """Coefficients of the partial along ``var``; top degree becomes zero."""
        src, dst, fac = self._diff[var]
        out = np.zeros_like(c)
        out[dst] = c[src] * fac.reshape((-1,) + (1,) * (c.ndim - 1))
        return out

    def derivative(self, c: np.ndarray, alpha) -> np.ndarray:
        """The partial derivative ``d^alpha f`` at the base point."""
        alpha = tuple(alpha)
        i = self.pos[alpha]
        return c[i] * self.factorial[i]

    def unit(self, var: int) -> int:
        a = [0] * self.nvars
        a[var] = 1
        return self.pos[tuple(a)]


def _align(a: np.ndarray, b: np.ndarray):
    """Right-align the batch axes of two coefficient arrays."""
    if a.ndim < b.ndim:
        a = a.reshape(a.shape[:1] + (1,) * (b.ndim - a.ndim) + a.shape[1:])
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape[:1] + (1,) * (a.ndim - b.ndim) + b.shape[1:])
    return a, b


@lru_cache(maxsize=None)
def algebra(nvars: int, order: int) -> JetAlgebra:
    return JetAlgebra(nvars, order)


class Jet:
    """A truncated Taylor expansion with batch axes."""

    __slots__ = ("alg", "c")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, alg: JetAlgebra, c: np.ndarray):
        self.alg = alg
        self.c = c

    @classmethod
    def variable(cls, alg, value, seed):
        """Base value ``value`` moving along ``seed`` (one weight per variable)."""
        value = np.asarray(value, dtype=float)
        seed = np.asarray(seed, dtype=float)
        batch = np.broadcast_shapes(value.shape, seed.shape[1:])
        c = np.zeros((alg.size,) + batch)
        c[0] = value
        if alg.order:
            for v in range(alg.nvars):
                c[1 + v] = seed[v]
        return cls(alg, c)

    @classmethod
    def constant(cls, alg, value):
        value = np.asarray(value, dtype=float)
        c = np.zeros((alg.size,) + value.shape)
        c[0] = value
        return cls(alg, c)

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = _align(self.c, other.c)
            return Jet(self.alg, a + b)
        shape = np.broadcast_shapes(self.c.shape[1:], np.shape(other))
        c = np.broadcast_to(self.c, (self.alg.size,) + shape).copy()
        c[0] += other
        return Jet(self.alg, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.alg, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.alg, self.alg.mul(self.c, other.c))
        a, b = _align(self.c, np.asarray(other, dtype=float)[None])
        return Jet(self.alg, a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        a, b = _align(self.c, np.asarray(other, dtype=float)[None])
        return Jet(self.alg, a / b)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = Jet.constant(self.alg, np.ones(self.c.shape[1:]))
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return self.power(float(p))

    def compose(self, derivs) -> "Jet":
        """``f(self)`` given ``[f(u0), f'(u0), ..., f^(order)(u0)]``."""
        h = Jet(self.alg, self.c.copy())
        h.c[0] = 0.0
        p = self.alg.order
        out = Jet.constant(self.alg, derivs[p] / math.factorial(p))
        for n in range(p - 1, -1, -1):
            out = out * h + derivs[n] / math.factorial(n)
        return out

    def power(self, a: float) -> "Jet":
        u0 = self.c[0]
        derivs = []
        coef = 1.0
        for n in range(self.alg.order + 1):
            derivs.append(coef * u0 ** (a - n))
            coef *= a - n
        return self.compose(derivs)

    def reciprocal(self) -> "Jet":
        return self.power(-1.0)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def exp(self) -> "Jet":
        e = np.exp(self.c[0])
        return self.compose([e] * (self.alg.order + 1))

    def log(self) -> "Jet":
        u0 = self.c[0]
        derivs = [np.log(u0)]
        for n in range(1, self.alg.order + 1):
            derivs.append((-1) ** (n - 1) * math.factorial(n - 1) / u0**n)
        return self.compose(derivs)


def sqrt(u):
    return u.sqrt() if isinstance(u, Jet) else np.sqrt(u)


def exp(u):
    return u.exp() if isinstance(u, Jet) else np.exp(u)


def log(u):
    return u.log() if isinstance(u, Jet) else np.log(u)


def jet_solve(alg: JetAlgebra, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for jet matrices ``A (m,d,d,...)`` and vectors ``b (m,d,...)``.

    Uses the Neumann series of ``A0^{-1} (A - A0)``, which terminates because
    the non-constant part is nilpotent in a truncated algebra.
    """
    A0 = np.moveaxis(A[0], (0, 1), (-2, -1))
    A0inv = np.moveaxis(np.linalg.inv(A0), (-2, -1), (0, 1))
    K = np.einsum("ij...,mjk...->mik...", A0inv, A)
    K[0] = 0.0
    term = np.einsum("ij...,mj...->mi...", A0inv, b)
    total = term
    for _ in range(alg.order):
        term = -alg.matvec(K, term)
        total = total + term
    return total
