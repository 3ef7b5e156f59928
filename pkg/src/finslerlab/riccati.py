"""Riccati evolution of normal curvatures and the scalar comparison lemma."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import BlowUp, IntegrationFailure

RTOL = 1e-12
ATOL = 1e-12


@dataclass
class RiccatiSolution:
    """Piecewise dense solution of ``k' = -k^2 - f`` (scalar or matrix)."""

    T: float
    pieces: list = field(repr=False)
    shape: tuple = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + self.shape)
        flat_t = t.ravel()
        flat = out.reshape((-1,) + self.shape)
        for i, s in enumerate(flat_t):
            for t0, t1, kind, sol in self.pieces:
                if t0 - 1e-14 <= s <= t1 + 1e-14:
                    val = sol(s).reshape(self.shape)
                    flat[i] = val if kind == "k" else _inv(val)
                    break
            else:
                raise ValueError(f"t={s} outside [0, {self.T}]")
        return out


def _inv(a):
    return 1.0 / a if np.ndim(a) == 0 else np.linalg.inv(a)


def riccati_evolve(k0, f, T, threshold=1e3, rtol=RTOL, atol=ATOL) -> RiccatiSolution:
    """Solve ``k' = -k^2 - f(t)`` on ``[0, T]``.

    ``k0`` is a real or a symmetric matrix (then ``f(t)`` returns a matrix of
    the same size).  Once ``|k|`` exceeds ``threshold`` the inverse ``u = 1/k``
    is integrated instead (``u' = 1 + u f u``); a zero of ``u`` (of ``det u``)
    is a blow-up, reported as :class:`BlowUp` with its time.
    """
    k0 = np.asarray(k0, dtype=float)
    shape = k0.shape
    scalar = k0.ndim == 0

    def fmat(t):
        return np.asarray(f(t), dtype=float).reshape(shape)

    def rhs_k(t, s):
        k = s.reshape(shape)
        return (-(k @ k if not scalar else k * k) - fmat(t)).ravel()

    def rhs_u(t, s):
        u = s.reshape(shape)
        return ((np.eye(shape[0]) if not scalar else 1.0) + (u @ fmat(t) @ u if not scalar else u * u * fmat(t))).ravel()

    def big(t, s):
        return threshold - np.abs(s).max()

    big.terminal = True

    def small(t, s):
        # leave the inverted chart once the solution is moderate again
        u = s.reshape(shape)
        return np.min(np.abs(np.linalg.eigvalsh(0.5 * (u + u.T)))) - 2.0 / threshold if not scalar \
            else abs(float(s[0])) - 2.0 / threshold

    small.terminal = True
    small.direction = 1

    def zero(t, s):
        u = s.reshape(shape)
        return float(np.linalg.det(u)) if not scalar else float(s[0])

    zero.terminal = True

    pieces = []
    t0, state, kind = 0.0, k0.ravel().astype(float), "k"
    while t0 < T:
        if kind == "k":
            res = solve_ivp(rhs_k, (t0, T), state, rtol=rtol, atol=atol, dense_output=True, events=big)
        else:
            res = solve_ivp(rhs_u, (t0, T), state, rtol=rtol, atol=atol, dense_output=True, events=[zero, small])
        if res.status == -1:
            raise IntegrationFailure(res.message)
        t1 = float(res.t[-1])
        pieces.append((t0, t1, kind, res.sol))
        if res.status == 0:
            break
        end = res.y[:, -1].reshape(shape)
        if kind == "k":
            kind, state = "u", np.asarray(_inv(end)).ravel()
        elif res.t_events[0].size:
            raise BlowUp(f"Riccati solution blows up at t={t1:.12g}", t1)
        else:
            kind, state = "k", np.asarray(_inv(end)).ravel()
        if t1 <= t0:
            raise IntegrationFailure("Riccati integration stalled")
        t0 = t1
    return RiccatiSolution(float(T), pieces, shape)


def riccati_batch(K0, F, T, t_eval, rtol=RTOL, atol=ATOL, limit=1e6):
    """Matrix Riccati ``K' = -K^2 - F(t)`` for a batch ``K0`` of shape ``(m, k, k)``.

    ``F(t)`` returns ``(m, k, k)``.  No inversion switch: the caller expects a
    finite solution and :class:`BlowUp` is raised if ``|K|`` exceeds ``limit``.
    """
    K0 = np.asarray(K0, dtype=float)
    shape = K0.shape

    def rhs(t, s):
        K = s.reshape(shape)
        return (-(K @ K) - F(t)).ravel()

    def big(t, s):
        return limit - np.abs(s).max()

    big.terminal = True
    res = solve_ivp(rhs, (0.0, T), K0.ravel(), rtol=rtol, atol=atol, t_eval=t_eval, events=big)
    if res.status == 1:
        raise BlowUp("Riccati solution left the finite range", float(res.t[-1]))
    if res.status == -1:
        raise IntegrationFailure(res.message)
    return res.y.T.reshape((len(res.t),) + shape)


# --------------------------------------------------------------------------- Lemma 2


@dataclass
class Lemma2Verdict:
    lam: float
    precondition_ok: bool
    holds: bool
    reason: str = ""
    first_violation: float | None = None
    max_value: float = -np.inf
    certificate_excess: float = 0.0


def lemma2_check(lam, f, T, fprime=None, grid=None, slack=1e-9) -> Lemma2Verdict:
    """Check ``f(t) <= -lam`` on ``[0, T]`` for ``f(0) <= -lam``, ``f' <= f^2 - lam^2``.

    ``f`` is a callable (vectorised) or a pair ``(t, values)`` of samples;
    ``fprime`` defaults to central differences of a callable ``f`` (which
    must accept points slightly outside ``[0, T]``) or the spline derivative
    of samples.
    The differential inequality is certified on the grid first; a failed
    certification or ``f(0) > -lam`` rejects the input.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if grid is None:
        grid = np.linspace(0.0, T, 2001)
    grid = np.asarray(grid, dtype=float)
    if callable(f):
        fv = np.asarray(f(grid), dtype=float) * np.ones_like(grid)
        if fprime is not None:
            dfv = np.asarray(fprime(grid), dtype=float) * np.ones_like(grid)
        else:
            h = 1e-4 * max(1.0, float(T))
            dfv = (8 * (f(grid + h) - f(grid - h)) - (f(grid + 2 * h) - f(grid - 2 * h))) / (12 * h)
    else:
        ts, vals = (np.asarray(a, dtype=float) for a in f)
        spl = CubicSpline(ts, vals)
        fv, dfv = spl(grid), (fprime(grid) if callable(fprime) else spl(grid, 1))
    if fv[0] > -lam + slack:
        return Lemma2Verdict(lam, False, False, f"f(0) = {fv[0]:.6g} > -lambda = {-lam:.6g}")
    excess = dfv - (fv**2 - lam**2)
    if excess.max() > slack:
        i = int(np.argmax(excess))
        return Lemma2Verdict(lam, False, False, f"f' exceeds f^2 - lambda^2 by {excess[i]:.3g} at t={grid[i]:.6g}",
                             certificate_excess=float(excess.max()))
    bad = np.nonzero(fv > -lam + slack)[0]
    first = float(grid[bad[0]]) if bad.size else None
    return Lemma2Verdict(lam, True, first is None, "" if first is None else "f rose above -lambda",
                         first, float(fv.max()), float(excess.max()))


def random_certified_f(lam, T, rng, n_modes=4):
    """A random ``f`` with ``f' = f^2 - lam^2 - q(t)``, ``q >= 0`` and ``f(0) <= -lam``.

    Returns ``(f, fprime)`` as vectorised callables backed by a dense solution.
    """
    amp = rng.uniform(0.0, 2.0, n_modes)
    freq = rng.uniform(0.2, 3.0, n_modes)
    phase = rng.uniform(0, 2 * np.pi, n_modes)

    def q(t):
        t = np.asarray(t, dtype=float)
        return np.sum((amp * np.sin(np.multiply.outer(t, freq) + phase)) ** 2, axis=-1)

    f0 = -lam - rng.exponential(1.0) * rng.integers(0, 2)

    def rhs(t, y):
        return y**2 - lam**2 - q(t)

    res = solve_ivp(rhs, (0.0, T), [f0], rtol=1e-12, atol=1e-12, dense_output=True)
    if res.status != 0:
        raise IntegrationFailure(res.message)

    def f(t):
        return res.sol(t)[0]

    def fprime(t):
        v = f(t)
        return v**2 - lam**2 - q(t)

    return f, fprime
