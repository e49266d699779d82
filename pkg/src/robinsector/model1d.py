"""The one-dimensional model operator ``H_a = -d^2/dr^2 - 1/(4 r^2) - 1/(a r)``.

Exact eigenpairs are Laguerre functions.  The discretization works, as the
sector one does, in ``u = v / sqrt(r)``:

    h_a(v) = int r u'^2 - u^2 / a  dr,    ||v||^2 = int r u^2 dr,

which is the radial part of a two-dimensional Coulomb problem.  Linear
elements in ``u`` with a node at ``r = 0`` are conforming for the Friedrichs
extension (whose domain functions behave like ``sqrt(r)``), and every entry
is integrated exactly, so the pencil of ``H_a`` is exactly ``a^-2`` times the
pencil of ``H_1`` on nodes scaled by ``a``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .discretization import mass_1d, stiffness_1d
from .pencil import AssembledPencil, ConfigurationError, symmetrize_exact


@dataclass(frozen=True)
class ModelProblem:
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigurationError(f"a must be positive, got {self.a}")


@dataclass(frozen=True)
class ExactEigenpair:
    n: int
    a: float
    energy: float
    norm_constant: float


@dataclass(frozen=True)
class RadialGridFunction:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("nodes must be strictly increasing")
        if nodes[0] <= 0:
            raise ConfigurationError("nodes must be positive")
        if np.shape(self.values) != nodes.shape:
            raise ConfigurationError("values must match nodes")


def exact_eigenvalue(n: int, a: float) -> float:
    if n < 1 or not a > 0:
        raise ValueError("need n >= 1 and a > 0")
    return -1.0 / ((2 * n - 1) ** 2 * a**2)


def laguerre(m: int, x):
    """``L_m(x)`` by the three-term recurrence."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), 1.0 - x
    if m == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def _laguerre_coeffs(m: int) -> np.ndarray:
    """Power-series coefficients of ``L_m``, lowest degree first."""
    k = np.arange(m + 1)
    return np.array([(-1.0) ** j * math.comb(m, j) / math.factorial(j) for j in k])


def _psi_raw(n: int, a: float, r):
    b = (2 * n - 1) * a
    r = np.asarray(r, dtype=float)
    return np.sqrt(r) * np.exp(-r / b) * laguerre(n - 1, 2 * r / b)


@lru_cache(maxsize=256)
def _norm2(n: int, a: float) -> float:
    b = (2 * n - 1) * a
    val, _ = integrate.quad(lambda r: _psi_raw(n, a, r) ** 2, 0, 40 * b, epsabs=0, epsrel=1e-12, limit=400)
    return val


def exact_pair(n: int, a: float) -> ExactEigenpair:
    return ExactEigenpair(n, a, exact_eigenvalue(n, a), 1.0 / math.sqrt(_norm2(n, a)))


def exact_eigenfunction(n: int, a: float, r, normalized: bool = False):
    """``psi_n(r) = sqrt(r) exp(-r/b) L_{n-1}(2r/b)``, ``b = (2n-1) a``."""
    if n < 1 or not a > 0:
        raise ValueError("need n >= 1 and a > 0")
    v = _psi_raw(n, a, r)
    if normalized:
        v = v / math.sqrt(_norm2(n, a))
    return v


def _poly_times_exp_derivs(q: np.ndarray, beta: float, t):
    """Value, first and second derivative of ``Q(t) exp(-beta t)``."""
    Q = np.polynomial.Polynomial(q)
    e = np.exp(-beta * t)
    q0, q1, q2 = Q(t), Q.deriv(1)(t), Q.deriv(2)(t)
    return q0 * e, (q1 - beta * q0) * e, (q2 - 2 * beta * q1 + beta**2 * q0) * e


def exact_eigenfunction_derivs(n: int, a: float, r, normalized: bool = True):
    """``psi, psi', psi''`` in closed form (product rule on ``sqrt(r) g(r)``)."""
    b = (2 * n - 1) * a
    c = _laguerre_coeffs(n - 1) * (2 / b) ** np.arange(n)
    r = np.asarray(r, dtype=float)
    g, g1, g2 = _poly_times_exp_derivs(c, 1 / b, r)
    s = np.sqrt(r)
    f = s * g
    f1 = g / (2 * s) + s * g1
    f2 = -g / (4 * r * s) + g1 / s + s * g2
    k = 1 / math.sqrt(_norm2(n, a)) if normalized else 1.0
    return k * f, k * f1, k * f2


def apply_model(n: int, a: float, r):
    """``(H_a psi_n)(r)`` from the closed-form derivatives."""
    f, _, f2 = exact_eigenfunction_derivs(n, a, r, normalized=False)
    r = np.asarray(r, dtype=float)
    return -f2 - f / (4 * r**2) - f / (a * r)


def model_grid(r_max: float = 40.0, n: int = 2000, grading: float = 1.0, r_min: float = 0.0) -> np.ndarray:
    """Nodes ``r_min = r_0 < ... < r_n = r_max``; ``grading`` is the ratio of consecutive steps."""
    if n < 9:
        raise ConfigurationError("need at least 8 interior nodes")
    h = grading ** np.arange(n, dtype=float)
    nodes = np.concatenate(([0.0], np.cumsum(h)))
    nodes = r_min + (r_max - r_min) * nodes / nodes[-1]
    nodes[-1] = r_max
    return nodes


def discretize_model(p: ModelProblem, nodes) -> AssembledPencil:
    """Linear-element pencil of ``H_a`` on ``[r_0, r_N]``.

    ``r_0 = 0`` keeps the vertex unknown (Friedrichs); ``r_0 > 0`` imposes a
    Dirichlet value there.  The value at ``r_N`` is always zero.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or len(nodes) < 10:
        raise ConfigurationError("need at least 8 interior nodes")
    if nodes[0] < 0 or np.any(np.diff(nodes) <= 0):
        raise ConfigurationError("nodes must be nonnegative and strictly increasing")
    K = stiffness_1d(nodes, weight_r=True) - mass_1d(nodes) / p.a
    M = mass_1d(nodes, weight_r=True)
    first = 0 if nodes[0] == 0.0 else 1
    keep = np.arange(first, len(nodes) - 1)
    K = symmetrize_exact(sp.csr_matrix(K)[keep][:, keep])
    M = symmetrize_exact(sp.csr_matrix(M)[keep][:, keep])
    dof = np.stack([keep, np.zeros_like(keep)], axis=1)
    meta = {"kind": "model", "a": p.a, "r_nodes": nodes}
    return AssembledPencil(K=K, M=M, lower_bound=-1.0 / p.a**2, dof_map=dof, meta=meta)


def to_grid_function(pencil: AssembledPencil, x: np.ndarray) -> RadialGridFunction:
    """``v = sqrt(r) u`` at the positive nodes, sign fixed so the profile starts positive."""
    nodes = pencil.meta["r_nodes"]
    u = np.zeros(len(nodes))
    u[pencil.dof_map[:, 0]] = x
    pos = nodes > 0
    v = np.sqrt(nodes[pos]) * u[pos]
    s = np.sign(v[np.argmax(np.abs(v) > 1e-3 * np.abs(v).max())])
    return RadialGridFunction(nodes[pos], s * v)


class FitConditionWarning(UserWarning):
    pass


def friedrichs_coefficients(u: RadialGridFunction, fit_window: tuple[float, float], max_condition: float = 1e8):
    """Least squares of ``u`` against ``{sqrt(r), sqrt(r) ln r}`` on the window."""
    lo, hi = fit_window
    sel = (u.nodes >= lo) & (u.nodes <= hi)
    if sel.sum() < 3:
        raise ConfigurationError("fit window contains fewer than three nodes")
    r = u.nodes[sel]
    A = np.stack([np.sqrt(r), np.sqrt(r) * np.log(r)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.asarray(u.values)[sel], rcond=None)
    cond = np.linalg.cond(A)
    if cond > max_condition:
        warnings.warn(f"ill-conditioned Friedrichs fit (condition {cond:.3g})", FitConditionWarning, stacklevel=2)
    return float(coef[0]), float(coef[1])
