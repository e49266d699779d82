import math

import mpmath as mp
import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from robinsector.interval import (
    DomainError, IntervalProblem, d_e1_d_gamma, e1_interval, e2_interval, eigfun_interval,
    ground_state, k_alpha, k_alpha_bound, phi_of_gamma, solve_m, transverse_energy_F,
    transverse_energy_parts,
)

mp.mp.dps = 40


def m_oracle(x):
    return float(mp.findroot(lambda m: m * mp.tanh(m) - x, mp.mpf(max(math.sqrt(x), x))))


def fd_interval(L, gamma, n):
    """Second-order ghost-point finite differences for -u'' with Robin ends."""
    h = 2 * L / n
    main = np.full(n + 1, 2.0)
    off = np.full(n, -1.0)
    A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    # ghost u_{-1} = u_1 + 2 h gamma u_0 at each end; symmetrize with half weights
    A[0, 0] -= 2 * h * gamma
    A[-1, -1] -= 2 * h * gamma
    A[0, 1] = A[-1, -2] = -2.0
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    S = np.sqrt(w)
    As = (w[:, None] * A) / (S[:, None] * S[None, :]) / h**2
    return sla.eigvalsh(As, subset_by_index=[0, 1])


@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.5, 1.0, 3.0, 17.0, 39.0, 41.0, 500.0])
def test_m_matches_high_precision_root(x):
    assert solve_m(x) == pytest.approx(m_oracle(x), rel=1e-13)


def test_m_of_one():
    assert solve_m(1.0) == pytest.approx(1.199678640257734, abs=1e-14)


def test_residual_on_log_grid():
    for x in np.logspace(-6, 6, 60):
        m = solve_m(x)
        res = abs(m * math.tanh(m) - x)
        assert res <= 1e-12 * max(1.0, x)


@given(st.floats(0.05, 20), st.floats(0.01, 30))
def test_scaling_law(L, gamma):
    E = e1_interval(IntervalProblem(L, gamma))
    assert E == pytest.approx(e1_interval(IntervalProblem(1.0, gamma * L)) / L**2, rel=1e-12)


@given(st.floats(0.05, 10), st.floats(0.01, 10))
def test_derivative_against_central_differences(L, gamma):
    h = 1e-6 * gamma
    num = (e1_interval(IntervalProblem(L, gamma + h)) - e1_interval(IntervalProblem(L, gamma - h))) / (2 * h)
    d = d_e1_d_gamma(IntervalProblem(L, gamma))
    assert abs(num - d) <= 1e-6 * max(1.0, abs(d))


@pytest.mark.parametrize("L,gamma", [(1.0, 0.5), (1.0, 2.0), (2.0, 1.0), (0.5, 3.0)])
def test_against_finite_differences(L, gamma):
    e1, e2 = e1_interval(IntervalProblem(L, gamma)), e2_interval(IntervalProblem(L, gamma))
    errs = []
    for n in (400, 800):
        f1, f2 = fd_interval(L, gamma, n)
        errs.append(abs(f1 - e1))
        assert f2 == pytest.approx(e2, abs=1e-3 * max(1, abs(e2)))
    assert errs[1] < 1e-3 * max(1, abs(e1))
    assert 1.7 < math.log2(errs[0] / errs[1]) < 2.3


def test_second_eigenvalue_sign_changes_at_one():
    assert e2_interval(IntervalProblem(1.0, 1.0)) == 0.0
    assert e2_interval(IntervalProblem(1.0, 1.2)) < 0 < e2_interval(IntervalProblem(1.0, 0.8))
    assert e2_interval(IntervalProblem(1.0, 0.0)) == pytest.approx(math.pi**2 / 4, rel=1e-12)


def test_phi_limits():
    assert phi_of_gamma(1e-6) == pytest.approx(-1 / 3, abs=1e-6)
    # large coupling: E_1 -> -gamma^2 so phi -> -1 + 1/gamma
    assert phi_of_gamma(50.0) == pytest.approx(-0.98, abs=1e-12)
    m = m_oracle(50.0)
    assert phi_of_gamma(50.0) == pytest.approx((-m * m + 50.0) / 2500.0, rel=1e-13)
    # the small-coupling series branch against extended precision
    g = mp.mpf("0.0005")
    m = mp.findroot(lambda m: m * mp.tanh(m) - g, mp.sqrt(g))
    assert phi_of_gamma(5e-4) == pytest.approx(float((-m * m + g) / g**2), abs=1e-12)


def test_ground_state_normalization():
    p = IntervalProblem(1.7, 0.8)
    t = np.linspace(-p.L, p.L, 20001)
    u = eigfun_interval(p, t, normalized=True)
    assert np.trapezoid(u * u, t) == pytest.approx(1.0, rel=1e-7)
    gs = ground_state(p)
    assert gs.C * math.cosh(gs.m_value) == pytest.approx(eigfun_interval(p, p.L, normalized=True), rel=1e-13)


def test_large_coupling_normalization_does_not_overflow():
    u = eigfun_interval(IntervalProblem(1.0, 2000.0), np.array([-1.0, 0.0, 1.0]), normalized=True)
    assert np.all(np.isfinite(u))
    assert u[0] == pytest.approx(math.sqrt(2000.0), rel=1e-3)


def test_domain_errors():
    with pytest.raises(DomainError):
        IntervalProblem(0.0, 1.0)
    with pytest.raises(DomainError):
        solve_m(0.0)
    with pytest.raises(DomainError):
        eigfun_interval(IntervalProblem(1.0, 1.0), 1.5)


def _F_oracle(x):
    m = mp.findroot(lambda m: m * mp.tanh(m) - x, mp.mpf(max(math.sqrt(x), x)))
    dm = 1 / (mp.tanh(m) + m / mp.cosh(m) ** 2)
    y = 2 * m
    S = mp.sinh(y) / y
    g = (mp.cosh(y) / y - mp.sinh(y) / y**2) / (S + 1)
    return float(dm**2 * g**2), float(dm**2 * (S - 1) / (S + 1))


@pytest.mark.parametrize("x", [1e-4, 0.1, 1.0, 5.0, 30.0])
def test_transverse_parts_against_oracle(x):
    g, h = transverse_energy_parts(x)
    go, ho = _F_oracle(x)
    assert g == pytest.approx(go, rel=1e-10)
    assert h == pytest.approx(ho, rel=1e-10)


def test_transverse_limits():
    g0, h0 = transverse_energy_parts(1e-9)
    assert g0 == pytest.approx(1 / 36, rel=1e-6)
    assert h0 == pytest.approx(1 / 12, rel=1e-6)
    assert transverse_energy_F(1e-9) == pytest.approx(1 / 9, rel=1e-6)
    assert transverse_energy_F(1e8) == pytest.approx(2.0, rel=1e-6)


@given(st.floats(0.01, 40), st.floats(0.02, 1.5))
def test_k_alpha_below_majorant(r, alpha):
    assert k_alpha(r, alpha) <= k_alpha_bound(r, alpha) * (1 + 1e-10)


def test_k_alpha_against_finite_difference_in_r():
    r, alpha = 2.3, 0.7
    th = np.polynomial.legendre.leggauss(200)
    s, w = th

    def phi(rr):
        # Phi~(r, theta) is the normalized interval ground state of half-length alpha, coupling r
        p = IntervalProblem(alpha, rr)
        return eigfun_interval(p, alpha * s, normalized=True)

    h = 1e-5
    d = (phi(r + h) - phi(r - h)) / (2 * h)
    assert alpha * np.sum(w * d * d) == pytest.approx(k_alpha(r, alpha), rel=1e-6)
