"""Studies over the opening angle: eigenvalue curves, counts, expansions, decay."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .discretization import PolarGrid, SectorProblem, assemble_sector, build_grid, nodal_values
from .eigensolver import EigenResult, SolverConfig, inertia_count, solve_lowest
from .model1d import exact_eigenfunction_derivs
from .pencil import AssembledPencil, ConfigurationError


# -- mesh policy ----------------------------------------------------------------------

def energy_estimate(alpha: float, n: int, gamma: float = 1.0) -> float:
    """Rough ``E_n``: exact for ``n = 1``, small-angle law otherwise."""
    if n == 1:
        return -gamma**2 / math.sin(alpha) ** 2
    return gamma**2 * (-1.0 / ((2 * n - 1) ** 2 * math.sin(alpha) ** 2) - 1.0 / 3.0)


def default_r_max(alpha: float, k: int = 1, gamma: float = 1.0, decay_lengths: float = 16.0,
                  cap: float = 200.0) -> float:
    """Truncation radius from the decay rate ``sqrt(-1 - E_k)`` of the k-th state."""
    e = energy_estimate(alpha, k, gamma) / gamma**2
    e = min(e, -1.05)
    return min(decay_lengths / math.sqrt(-1.0 - e), cap) / gamma


@dataclass(frozen=True)
class MeshBudget:
    """Nested refinement policy.

    Level ``l`` has ``n_r0 2^l`` radial and ``n_theta0 2^l`` angular elements;
    grading ratios are square-rooted at each level so the spaces are nested.
    """

    n_r0: int = 200
    n_theta0: int = 8
    grading0: float = 1.01
    theta_grading0: float | None = None   # None: 1.3 above alpha = 1, else uniform
    min_level: int = 1
    max_level: int = 3
    rel_tol: float = 1e-4
    r_max: float | None = None
    decay_lengths: float = 16.0

    def grid(self, alpha: float, k: int = 1, gamma: float = 1.0, level: int = 0) -> PolarGrid:
        r_max = self.r_max or default_r_max(alpha, k, gamma, self.decay_lengths)
        tg = self.theta_grading0 if self.theta_grading0 is not None else (1.3 if alpha > 1.0 else 1.0)
        g = build_grid(0.0, r_max, self.n_r0, self.grading0, self.n_theta0, tg)
        for _ in range(level):
            g = g.refined()
        return g


# -- converged single-angle solves ----------------------------------------------------

@dataclass
class SectorSolution:
    alpha: float
    gamma: float
    values: list              # finest-mesh eigenvalues below -gamma^2 (min-max upper bounds)
    extrapolated: list        # Richardson values from the two finest meshes
    enclosures: list          # (lo, hi): certificate on the finest pencil, widened by the error estimate
    count: int                # inertia count below -gamma^2 on the finest mesh; a lower bound, and
                              # r_max is sized for the k-th state, so weaker states may be cut off
    converged: bool
    history: list             # per level: (n_r, n_theta, n_dof, values)
    results: list = field(repr=False, default_factory=list)
    pencil: AssembledPencil | None = field(repr=False, default=None)


def converge_sector(alpha: float, k: int = 1, gamma: float = 1.0, budget: MeshBudget | None = None,
                    cfg: SolverConfig | None = None, keep_pencil: bool = False) -> SectorSolution:
    """Even-parity solve refined until eigenvalues below ``-gamma^2`` settle.

    The stopping test is the two-mesh Richardson estimate for a second-order
    method, ``|E_h - E_2h| / 3 <= rel_tol |E_h|``.
    """
    budget = budget or MeshBudget()
    p = SectorProblem(alpha, gamma, "even")
    thr = -gamma**2
    history = []
    prev = None
    converged = False
    for level in range(budget.max_level + 1):
        g = budget.grid(alpha, k, gamma, level)
        pencil = assemble_sector(p, g)
        res = solve_lowest(pencil, k, cfg)
        vals = [r.value for r in res if r.value < thr]
        history.append((g.n_r, g.n_theta, pencil.n, vals))
        if prev is not None and level >= budget.min_level and len(vals) == len(prev) and vals:
            est = np.abs(np.subtract(vals, prev)) / 3
            if np.all(est <= budget.rel_tol * np.abs(vals)) and all(r.converged for r in res[: len(vals)]):
                converged = True
                break
        prev = vals
    vals = np.array(vals)
    prev = history[-2][3] if len(history) > 1 else None
    if prev is not None and len(prev) == len(vals):
        extra = vals + (vals - np.array(prev)) / 3
    else:
        extra = vals.copy()
    encl = []
    for r, e in zip(res, extra):
        lo, hi = r.enclosure
        # the discrete value is an upper bound; the error estimate widens downwards
        encl.append((min(lo, e - abs(r.value - e)), hi))
    count = inertia_count(pencil, thr).count
    return SectorSolution(alpha, gamma, vals.tolist(), extra.tolist(), encl, count, converged, history,
                          results=res, pencil=pencil if keep_pencil else None)


# -- scans --------------------------------------------------------------------------

@dataclass
class AlphaScan:
    alphas: list
    eigenvalues: list
    extrapolated: list
    enclosures: list
    counts: list
    mesh_metadata: list
    flags: list

    def __post_init__(self):
        a = np.asarray(self.alphas)
        if np.any(np.diff(a) <= 0):
            raise ValueError("alphas must be strictly increasing")
        for ev in self.eigenvalues:
            if np.any(np.diff(ev) < 0):
                raise ValueError("eigenvalue lists must be ascending")

    def column(self, n: int, extrapolated: bool = False) -> np.ndarray:
        src = self.extrapolated if extrapolated else self.eigenvalues
        return np.array([ev[n - 1] if len(ev) >= n else np.nan for ev in src])


def _scan_one(args):
    alpha, k, gamma, budget, cfg = args
    return converge_sector(alpha, k, gamma, budget, cfg)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def scan_alpha(alphas, k: int = 1, budget: MeshBudget | None = None, gamma: float = 1.0,
               cfg: SolverConfig | None = None, jobs: int = 1) -> AlphaScan:
    """Converged eigenvalues below ``-gamma^2`` for each angle, in angle order."""
    alphas = sorted(float(a) for a in alphas)
    for a in alphas:
        if not 0 < a < math.pi / 2:
            raise ConfigurationError(f"alpha {a} outside (0, pi/2)")
    work = [(a, k, gamma, budget, cfg) for a in alphas]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            sols = list(ex.map(_scan_one, work))
    else:
        sols = [_scan_one(w) for w in work]
    return AlphaScan(
        alphas=alphas,
        eigenvalues=[s.values for s in sols],
        extrapolated=[s.extrapolated for s in sols],
        enclosures=[s.enclosures for s in sols],
        counts=[s.count for s in sols],
        mesh_metadata=[s.history for s in sols],
        flags=["converged" if s.converged else "budget-exhausted" for s in sols],
    )


def monotone_verdict(scan: AlphaScan, n: int = 1) -> list[bool]:
    """Adjacent pairs with disjoint, increasing enclosures of ``E_n``."""
    out = []
    for i in range(len(scan.alphas) - 1):
        a, b = scan.enclosures[i], scan.enclosures[i + 1]
        if len(a) < n or len(b) < n:
            continue
        out.append(a[n - 1][1] < b[n - 1][0])
    return out


# -- small-angle expansion ----------------------------------------------------------

@dataclass(frozen=True)
class ExpansionFit:
    n: int
    coefficients: np.ndarray
    condition: float
    residual_norm: float


def fit_expansion(alphas, energies, n: int, order: int) -> ExpansionFit:
    """Least squares ``alpha^2 E_n = sum_j lambda_j alpha^(2j)``, ``j = 0..order``."""
    a = np.asarray(alphas, dtype=float)
    e = np.asarray(energies, dtype=float)
    ok = np.isfinite(e)
    a, e = a[ok], e[ok]
    if len(a) < order + 2:
        raise ValueError(f"order {order} needs at least {order + 2} points, got {len(a)}")
    A = np.vander(a**2, order + 1, increasing=True)
    y = a**2 * e
    coef, res, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    if rank < order + 1:
        raise ValueError(f"rank deficient fit; need {order + 2} distinct angles")
    r = y - A @ coef
    return ExpansionFit(n, coef, float(sv[0] / sv[-1]), float(np.linalg.norm(r)))


def fit_scan(scan: AlphaScan, n: int, order: int, extrapolated: bool = True) -> ExpansionFit:
    return fit_expansion(scan.alphas, scan.column(n, extrapolated), n, order)


def lambda1_quadrature(n: int, include_lambda0_term: bool = True) -> float:
    """First correction ``lambda_1`` in ``alpha^2 E_n = lambda_0 + lambda_1 alpha^2 + ...``.

    With ``u_0 = psi_n`` (``a = 1``), ``f = t u_0 / 2`` and
    ``L_0 = -d^2/dt^2 - 1/(4 t^2)``, solvability of the order-``alpha^2``
    equation gives

        lambda_1 = < -f/t + (1/3) L_0 f, u_0 > - (lambda_0 / 3) < f, u_0 >.

    The last term comes from the ``eta^2`` part of the transverse correction
    multiplying ``lambda_0``; ``include_lambda0_term=False`` drops it.
    """
    if n < 1:
        raise ValueError("n >= 1")
    lam0 = -1.0 / (2 * n - 1) ** 2
    b = 2 * n - 1

    def integrand(t):
        u, u1, u2 = exact_eigenfunction_derivs(n, 1.0, t)
        f = t * u / 2
        f2 = u1 + t * u2 / 2
        Lf = -f2 - f / (4 * t * t)
        val = (-f / t + Lf / 3) * u
        if include_lambda0_term:
            val -= lam0 / 3 * f * u
        return val

    pts = [b * x for x in (0.5, 1, 2, 4, 8)]
    val, _ = integrate.quad(integrand, 0, 60 * b, points=pts, epsabs=1e-13, epsrel=1e-11, limit=400)
    return float(val)


# -- counting -----------------------------------------------------------------------

def count_below(alpha: float, threshold: float = -1.0, gamma: float = 1.0, grid: PolarGrid | None = None) -> int:
    """``N(T_alpha, threshold)`` on one mesh: a lower bound for the exact count."""
    if grid is None:
        grid = build_grid(0.0, 60.0 / gamma, 1600, 1.0025, 16)
    return inertia_count(assemble_sector(SectorProblem(alpha, gamma, "even"), grid), threshold * gamma**2).count


def count_growth(alphas, counts) -> tuple[float, list]:
    """Empirical ``kappa = min N(alpha) alpha`` and the count table, ascending in alpha.

    Raises ``ValueError`` if the counts increase with the angle.
    """
    order = np.argsort(alphas)
    a = np.asarray(alphas, dtype=float)[order]
    c = np.asarray(counts, dtype=int)[order]
    if np.any(np.diff(c) > 0):
        raise ValueError("counts must be non-increasing in alpha")
    table = [(float(x), int(y)) for x, y in zip(a, c)]
    return float(np.min(a * c)), table


def boundedness_constant(alphas, columns: dict) -> float:
    """``C = max |alpha^2 E_n + 1/(2n-1)^2| / alpha^2`` over angles and indices."""
    a = np.asarray(alphas, dtype=float)
    worst = 0.0
    for n, e in columns.items():
        e = np.asarray(e, dtype=float)
        dev = np.abs(a**2 * e + 1.0 / (2 * n - 1) ** 2) / a**2
        worst = max(worst, float(np.nanmax(dev)))
    return worst


def min_count_estimate(alpha: float, C: float) -> int:
    """Integer part of ``n_alpha - 1``, ``n_alpha = (1/(alpha sqrt(1 + C)) + 1)/2``."""
    n_alpha = (1.0 / (alpha * math.sqrt(1.0 + C)) + 1.0) / 2.0
    return int(math.floor(n_alpha - 1.0))


# -- decay --------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    rate: float
    window: tuple[float, float]
    goodness: float


def fit_decay(r, profile, window) -> DecayFit:
    """Half the slope of ``-ln p`` on the window, by least squares."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(profile, dtype=float)
    lo, hi = window
    sel = (r >= lo) & (r <= hi) & (p > 0)
    if sel.sum() < 3:
        raise ValueError("fewer than three usable samples in the window")
    x, y = r[sel], np.log(p[sel])
    slope, _ = np.polyfit(x, y, 1)
    corr = float(np.corrcoef(x, y)[0, 1]) if np.ptp(y) > 0 else 1.0
    return DecayFit(rate=-slope / 2, window=(float(lo), float(hi)), goodness=abs(corr))


def radial_profile(pencil: AssembledPencil, x) -> tuple[np.ndarray, np.ndarray]:
    """``p(r) = int |v(r, theta)|^2 dtheta = r int u^2 dtheta`` at the radial nodes."""
    U = nodal_values(pencil, np.asarray(x))
    r = pencil.meta["r_nodes"]
    th = pencil.meta["theta_nodes"]
    w = np.zeros(len(th))
    h = np.diff(th)
    w[:-1] += h / 2
    w[1:] += h / 2
    return r, r * (U**2 @ w)


def agmon_decay_rate(result: EigenResult, pencil: AssembledPencil, fit_fraction=(0.4, 0.7),
                     floor: float = 1e-14) -> DecayFit:
    """Fitted exponential decay of the radial profile of an eigenvector."""
    r, p = radial_profile(pencil, result.vector)
    r_max = pencil.meta["r_max"]
    lo, hi = fit_fraction[0] * r_max, fit_fraction[1] * r_max
    peak = p.max()
    under = (r >= lo) & (r <= hi) & (p < floor * peak)
    if np.any(under):
        hi = float(r[under].min())
        warnings.warn(f"profile underflows in the window; fitting on [{lo:.4g}, {hi:.4g}]", stacklevel=2)
        if hi <= lo:
            raise ValueError("profile underflows before the fit window")
    return fit_decay(r, p, (lo, hi))
