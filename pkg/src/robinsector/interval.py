"""One-dimensional Robin Laplacians on the half-line and on intervals.

``B_{L,gamma}`` is ``-u''`` on ``(-L, L)`` with ``-u'(-L) = gamma u(-L)`` and
``u'(L) = gamma u(L)``.  Everything here reduces to the scalar ``m(x)``, the
positive root of ``m tanh m = x``, through the scaling law
``E_j(L, gamma) = E_j(1, gamma L) / L**2``.

Hyperbolic ratios are evaluated in terms of ``exp(-2m)`` so that nothing
overflows for large ``gamma L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ROOT_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


@dataclass(frozen=True)
class IntervalProblem:
    L: float
    gamma: float

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"half-length must be positive, got {self.L}")


@dataclass(frozen=True)
class IntervalGroundState:
    m_value: float
    E1: float
    C: float


def _bracketed_newton(f, df, lo, hi, x0, tol, max_iter=200):
    """Newton iteration safeguarded by bisection on ``[lo, hi]``; ``f`` increasing."""
    x = min(max(x0, lo), hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx > 0:
            hi = x
        else:
            lo = x
        if fx == 0.0 or (abs(fx) <= tol and abs(fx) <= 8 * np.finfo(float).eps * max(1.0, abs(x))):
            return x
        d = df(x)
        step = x - fx / d if d > 0 else 0.5 * (lo + hi)
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == x or hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return step
        x = step
    raise ArithmeticError("root finder did not converge")


def solve_m(gammaL: float) -> float:
    """Positive root of ``m tanh m = gammaL``.

    The residual is below 1e-12, absolute for ``gammaL <= 1`` and relative
    above that.
    """
    x = float(gammaL)
    if not x > 0:
        raise DomainError(f"m(x) needs x > 0, got {x}")
    if x > 40.0:
        # tanh(m) = 1 - 2e^{-2m} + ...; one fixed-point step is exact in double
        return x / math.tanh(x)
    tol = ROOT_TOL * max(1.0, x) * 0.5

    def f(m):
        return m * math.tanh(m) - x

    def df(m):
        return math.tanh(m) + m / math.cosh(m) ** 2

    # m tanh m >= m^2/(1+m) brackets the root in [sqrt(x), x + 1]
    lo, hi = 0.0, max(math.sqrt(x), x) + 1.0
    return _bracketed_newton(f, df, lo, hi, max(math.sqrt(x), x), tol)


def _odd_root(gammaL: float) -> tuple[float, int]:
    """Scaled wavenumber of the lowest odd mode and the sign of its energy.

    Odd eigenfunctions ``sinh(k t)`` need ``kappa coth kappa = gammaL`` (energy
    ``-kappa**2``) and ``sin(k t)`` need ``kappa cot kappa = gammaL`` with
    ``kappa`` in ``(0, pi)`` (energy ``+kappa**2``).
    """
    x = float(gammaL)
    if x == 1.0:
        return 0.0, 0
    if x > 1.0:
        if x > 40.0:
            return x, -1
        tol = ROOT_TOL * max(1.0, x) * 0.5

        def f(k):
            return k / math.tanh(k) - x if k > 1e-8 else (k * k / 3.0 + 1.0) - x

        def df(k):
            if k < 1e-4:
                return 2.0 * k / 3.0
            return 1.0 / math.tanh(k) - k / math.sinh(k) ** 2

        k0 = math.sqrt(3.0 * (x - 1.0)) if x < 1.5 else x
        return _bracketed_newton(f, df, 0.0, x + 1.0, k0, tol), -1
    # kappa cot kappa decreases from 1 to -inf on (0, pi): solve g = -kappa cot kappa
    tol = ROOT_TOL * 0.5

    def g(k):
        return -(k * math.cos(k) / math.sin(k)) + x if k > 1e-8 else -(1.0 - k * k / 3.0) + x

    def dg(k):
        s = math.sin(k)
        return -(math.cos(k) / s - k / s**2)

    k0 = math.pi / 2 if x <= 0 else math.sqrt(3.0 * (1.0 - x)) if x > 0.9 else 1.0
    return _bracketed_newton(g, dg, 0.0, math.pi, k0, tol), +1


def e1_interval(p: IntervalProblem) -> float:
    """Lowest eigenvalue ``-m(gamma L)^2 / L^2``; needs ``gamma > 0``."""
    if not p.gamma > 0:
        raise DomainError(f"e1_interval needs gamma > 0, got {p.gamma}")
    m = solve_m(p.gamma * p.L)
    return -(m / p.L) ** 2


def e2_interval(p: IntervalProblem) -> float:
    """Second eigenvalue; negative exactly when ``gamma L > 1``."""
    k, sign = _odd_root(p.gamma * p.L)
    return sign * (k / p.L) ** 2


def _cosh2_over_S1(m: float) -> float:
    """``cosh(m)^2 / (sinh(2m)/(2m) + 1)`` without overflow."""
    y = 2.0 * m
    e = math.exp(-y)
    num = y * ((1.0 + e * e) / 2.0 + e)
    den = 2.0 * (-math.expm1(-2.0 * y) / 2.0 + y * e)
    return num / den


def d_e1_d_gamma(p: IntervalProblem) -> float:
    """Derivative of ``E_1(L, gamma)`` in ``gamma``: ``-2 cosh^2 m / (L (S + 1))``."""
    if not p.gamma > 0:
        raise DomainError(f"d_e1_d_gamma needs gamma > 0, got {p.gamma}")
    m = solve_m(p.gamma * p.L)
    return -2.0 * _cosh2_over_S1(m) / p.L


def phi_of_gamma(gamma: float) -> float:
    """The bounded remainder ``(E_1(1, gamma) + gamma) / gamma^2``."""
    if not gamma > 0:
        raise DomainError(f"phi needs gamma > 0, got {gamma}")
    if gamma < 1e-3:
        # E_1(1,g) = -g - g^2/3 - 4g^3/45 - 16g^4/945 + O(g^5); direct
        # subtraction cancels most digits here
        return -1.0 / 3.0 - 4.0 * gamma / 45.0 - 16.0 * gamma**2 / 945.0
    return (e1_interval(IntervalProblem(1.0, gamma)) + gamma) / gamma**2


def _S_plus_1_scaled(m: float) -> float:
    """``(sinh(2m)/(2m) + 1) * exp(-2m)``."""
    y = 2.0 * m
    if y < 1e-8:
        return 2.0 * math.exp(-y)
    return -math.expm1(-2.0 * y) / (2.0 * y) + math.exp(-y)


def ground_state(p: IntervalProblem) -> IntervalGroundState:
    if not p.gamma > 0:
        raise DomainError(f"ground state needs gamma > 0, got {p.gamma}")
    m = solve_m(p.gamma * p.L)
    C = math.exp(-m) / math.sqrt(p.L * _S_plus_1_scaled(m))
    return IntervalGroundState(m_value=m, E1=-(m / p.L) ** 2, C=C)


def eigfun_interval(p: IntervalProblem, t, normalized: bool = False):
    """Ground state ``cosh(m t / L)``, times ``C_L(gamma)`` if ``normalized``.

    Accepts scalars or arrays for ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > p.L * (1 + 1e-14)):
        raise DomainError("eigfun_interval needs |t| <= L")
    if not p.gamma > 0:
        raise DomainError(f"eigfun_interval needs gamma > 0, got {p.gamma}")
    m = solve_m(p.gamma * p.L)
    s = m * np.abs(t_arr) / p.L
    if not normalized:
        out = np.cosh(s)
    else:
        # C cosh(s) = exp(s - m) (1 + e^{-2s}) / 2 / sqrt(L * (S+1) e^{-2m})
        out = np.exp(s - m) * (1.0 + np.exp(-2.0 * s)) / 2.0 / math.sqrt(p.L * _S_plus_1_scaled(m))
    return float(out) if np.ndim(out) == 0 else out


def _dm_dx(m: float) -> float:
    """``m'(x)`` from implicit differentiation of ``m tanh m = x``."""
    if m > 20.0:
        return 1.0 / (math.tanh(m) + 4.0 * m * math.exp(-2.0 * m))
    return 1.0 / (math.tanh(m) + m / math.cosh(m) ** 2)


def _ratio_G(m: float) -> float:
    """``(cosh(2m)/(2m) - sinh(2m)/(2m)^2) / (sinh(2m)/(2m) + 1)``."""
    y = 2.0 * m
    if y < 1e-2:
        y2 = y * y
        num = y * (1.0 / 3.0 + y2 / 30.0 + y2 * y2 / 840.0)  # (y cosh y - sinh y) / y^2
        den = 2.0 + y2 / 6.0 + y2 * y2 / 120.0
        return num / den
    e = math.exp(-y)
    num = (1.0 + e * e) / 2.0 - (-math.expm1(-2.0 * y)) / (2.0 * y)
    den = -math.expm1(-2.0 * y) / 2.0 + y * e
    return num / den


def _ratio_H(m: float) -> float:
    """``(sinh(2m)/(2m) - 1) / (sinh(2m)/(2m) + 1)``."""
    y = 2.0 * m
    if y < 1e-2:
        y2 = y * y
        sm1 = y2 / 6.0 + y2 * y2 / 120.0 + y2**3 / 5040.0
        return sm1 / (2.0 + sm1)
    e = math.exp(-y)
    a = -math.expm1(-2.0 * y)
    return (a - 2.0 * y * e) / (a + 2.0 * y * e)


def transverse_energy_parts(x: float) -> tuple[float, float]:
    """The two terms ``(G(x), H(x))`` of the transverse-energy majorant."""
    if not x > 0:
        raise DomainError(f"F needs x > 0, got {x}")
    m = solve_m(x)
    dm2 = _dm_dx(m) ** 2
    return dm2 * _ratio_G(m) ** 2, dm2 * _ratio_H(m)


def transverse_energy_F(x: float) -> float:
    """``F(x) = G(x) + H(x)``, so that ``K_alpha(r) <= 2 alpha^2 F(r alpha)``.

    ``F`` tends to ``1/36 + 1/12 = 1/9`` at ``0`` and to ``2`` at infinity.
    """
    g, h = transverse_energy_parts(x)
    return g + h


def k_alpha_bound(r: float, alpha: float) -> float:
    """Majorant ``2 alpha^2 F(r alpha)`` of ``K_alpha(r)``."""
    if not r > 0:
        raise DomainError("k_alpha_bound needs r > 0")
    return 2.0 * alpha**2 * transverse_energy_F(r * alpha)


def k_alpha(r: float, alpha: float, n_quad: int = 64) -> float:
    """``K_alpha(r) = int |d/dr Phi~(r, theta)|^2 dtheta`` evaluated directly.

    Uses ``d/dr Phi~ = alpha m' (C'/C Phi~ / (alpha m') + C theta/alpha sinh(m theta/alpha))``
    on Gauss-Legendre nodes; diagnostic companion to :func:`k_alpha_bound`.
    """
    m = solve_m(r * alpha)
    dm = _dm_dx(m) * alpha  # d m(r alpha) / dr
    # log-derivative of C = (alpha (S+1))^{-1/2} in m, times dm
    dlogC = -_ratio_G(m) * dm
    s, w = np.polynomial.legendre.leggauss(n_quad)
    # Phi~ and its r-derivative on theta = alpha s, both scaled by C
    Sp1s = _S_plus_1_scaled(m)
    pref = 1.0 / math.sqrt(alpha * Sp1s)
    ch = np.exp(m * np.abs(s) - m) * (1 + np.exp(-2 * m * np.abs(s))) / 2
    sh = np.sign(s) * np.exp(m * np.abs(s) - m) * (1 - np.exp(-2 * m * np.abs(s))) / 2
    d = pref * (dlogC * ch + dm * s * sh)
    return float(alpha * np.sum(w * d * d))
