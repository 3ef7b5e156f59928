import numpy as np
import pytest

from finslerlab.errors import BlowUp
from finslerlab.riccati import lemma2_check, random_certified_f, riccati_batch, riccati_evolve

TS = np.linspace(0.0, 3.0, 31)


@pytest.mark.parametrize("k0, f, exact", [
    (1.0, 0.0, lambda t: 1 / (1 + t)),
    (1 / np.tanh(0.5), -1.0, lambda t: 1 / np.tanh(0.5 + t)),
    (0.5, -1.0, lambda t: np.tanh(np.arctanh(0.5) + t)),
    (0.0, 1.0, lambda t: -np.tan(t) if np.all(t < 1.5) else None),
])
def test_scalar_closed_forms(k0, f, exact):
    T = 1.4 if k0 == 0.0 else 3.0
    sol = riccati_evolve(k0, lambda t: f, T)
    ts = np.linspace(0, T, 15)
    assert np.abs(sol(ts) - exact(ts)).max() < 1e-9


def test_blowup_time_matches():
    for k0 in (-1.0, -0.5, -2.0):
        with pytest.raises(BlowUp) as err:
            riccati_evolve(k0, lambda t: 0.0, 5.0)
        assert err.value.time == pytest.approx(-1 / k0, abs=1e-6)


def test_matrix_version_and_batch():
    K0 = np.diag([1.0, 2.0])
    sol = riccati_evolve(K0, lambda t: -np.eye(2), 2.0)
    val = sol(np.array([1.0]))[0]
    # k = 1 is stationary for k' = 1 - k^2; k(0) = 2 gives coth(arccoth 2 + t)
    assert np.allclose(np.diag(val), [1.0, 1 / np.tanh(np.arctanh(0.5) + 1)], atol=1e-9)
    K = riccati_batch(np.stack([K0, 3 * np.eye(2)]), lambda t: np.zeros((2, 2, 2)), 1.0, np.array([0.0, 1.0]))
    assert np.allclose(K[1, 1], np.eye(2) * 0.75, atol=1e-10)


def test_lemma2_suite(rng):
    for lam in (0.0, 0.5, 1.0):
        for _ in range(10):
            f, fp = random_certified_f(lam, 5.0, rng)
            v = lemma2_check(lam, f, 5.0, fprime=fp)
            assert v.precondition_ok and v.holds


def test_lemma2_rejects_bad_inputs():
    v = lemma2_check(1.0, lambda t: -0.5 + 0 * t, 1.0)
    assert not v.precondition_ok
    # f' > f^2 - lam^2: certification fails
    v = lemma2_check(0.0, lambda t: -1.0 + t, 1.0)
    assert not v.precondition_ok and "exceeds" in v.reason
    with pytest.raises(ValueError):
        lemma2_check(-1.0, lambda t: t, 1.0)


def test_lemma2_sampled_input():
    ts = np.linspace(0, 2, 401)
    v = lemma2_check(1.0, (ts, -1.0 - 0 * ts), 2.0)
    assert v.holds
