"""Lowest eigenpairs, inertia counts and residual certificates for pencils ``(K, M)``.

Every pencil carries an analytic lower bound ``b`` of its Rayleigh quotient,
so ``K + cM`` with ``c = 1 - b`` is positive definite with smallest
eigenvalue at least one.  The iterative solver and the certificate both work
with that shifted pencil in the ``M`` geometry.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .pencil import AssembledPencil

log = logging.getLogger(__name__)

DENSE_LIMIT = 3000
ILU_DROP_TOL = 1e-8
PRECONDITIONERS = ("incomplete-factor", "diagonal", "none")


class SolverError(RuntimeError):
    """Hard solver failure, e.g. an indefinite shifted pencil."""


@dataclass(frozen=True)
class SolverConfig:
    block_size: int = 0          # 0: k + 4
    tolerance: float = 1e-8      # residual in the M^-1 norm relative to |lambda| + 1
    max_iterations: int = 400
    shift_c: float | None = None  # None: 1 - lower_bound
    preconditioner: str = "incomplete-factor"
    debug: bool = False

    def __post_init__(self):
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance and max_iterations must be positive")


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    residual: float
    enclosure: tuple[float, float]
    converged: bool = True
    epsilon: float = float("nan")
    iterations: int = 0
    status: str = "tolerance"   # or "rounding-floor", "max-iterations", "dense"

    def __post_init__(self):
        lo, hi = self.enclosure
        if not lo <= self.value <= hi:
            raise ValueError("enclosure must contain the value")


@dataclass(frozen=True)
class Certificate:
    """Outcome of the quasimode bound; ``interval`` is None when ``epsilon >= 1``."""

    epsilon: float
    interval: tuple[float, float] | None

    @property
    def informative(self) -> bool:
        return self.interval is not None


def _shift(pencil: AssembledPencil, cfg: SolverConfig) -> float:
    c = 1.0 - pencil.lower_bound if cfg.shift_c is None else cfg.shift_c
    if not c > -pencil.lower_bound:
        raise SolverError(f"shift {c} does not exceed -lower_bound = {-pencil.lower_bound}; K + cM may be indefinite")
    return c


def _preconditioner(A: sp.csr_matrix, kind: str):
    if kind == "none":
        return None
    if kind == "incomplete-factor":
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ilu = sla.spilu(A.tocsc(), drop_tol=ILU_DROP_TOL, fill_factor=30)
            return sla.LinearOperator(A.shape, matvec=ilu.solve, matmat=ilu.solve, dtype=float)
        except RuntimeError:
            log.info("incomplete factorization failed, using the diagonal")
    d = A.diagonal()
    return sla.LinearOperator(A.shape, matvec=lambda x: x / d, matmat=lambda X: X / d[:, None], dtype=float)


def residual_norms(K, M, X: np.ndarray, lam: np.ndarray, Msolve=None) -> np.ndarray:
    """``||K x - lam M x||_{M^-1} / (|lam| + 1)`` for each column, with ``x^T M x = 1``."""
    R = K @ X - (M @ X) * lam
    Z = Msolve(R) if Msolve is not None else sla.spsolve(M.tocsc(), R).reshape(R.shape)
    nrm = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, Z), 0.0))
    return nrm / (np.abs(lam) + 1.0)


def _m_orthonormalize(X: np.ndarray, M) -> np.ndarray:
    G = X.T @ (M @ X)
    L = np.linalg.cholesky((G + G.T) / 2)
    return la.solve_triangular(L, X.T, lower=True).T


def _svqb(X: np.ndarray, MX: np.ndarray, drop: float = 1e-10):
    """M-orthonormal basis of span(X); near-dependent directions are dropped."""
    G = X.T @ MX
    G = (G + G.T) / 2
    d = np.sqrt(np.maximum(np.diag(G), 1e-300))
    G = G / d[:, None] / d[None, :]
    w, V = np.linalg.eigh(G)
    keep = w > drop * w.max()
    C = (V[:, keep] / np.sqrt(w[keep])) / d[:, None]
    return X @ C, MX @ C


def _complement(X, MX, W, M):
    """M-orthonormal basis of the part of span(W) M-orthogonal to X."""
    for _ in range(2):
        W = W - X @ (MX.T @ W)
    MW = M @ W
    for _ in range(2):
        W, MW = _svqb(W, MW)
        if W.shape[1] == 0:
            break
        W = W - X @ (MX.T @ W)
        MW = M @ W
    return W, MW


def lobpcg(A, M, X: np.ndarray, T=None, tol: float = 1e-8, max_iterations: int = 400,
           n_wanted: int | None = None, Msolve=None, shift: float = 0.0, history: list | None = None,
           patience: int = 8):
    """Block LOBPCG for the smallest eigenvalues of ``A x = mu M x``, ``A`` SPD.

    Rayleigh-Ritz on ``[X, W, P]``, where the preconditioned residuals ``W``
    and the previous directions ``P`` are first made M-orthogonal to the
    current (M-orthonormal) iterate ``X``.  Columns whose ``M^-1``-residual
    relative to ``|mu - shift| + 1`` is below ``tol`` are soft-locked:
    they stay in the Rayleigh-Ritz basis but get no new directions.
    Stiff pencils have a rounding floor above ``tol``; when the wanted
    residuals stop improving for ``patience`` iterations the iteration ends
    with status ``"rounding-floor"``.  Returns ``(mu, X, iterations, status)``.
    """
    n, bs = X.shape
    k = n_wanted or bs
    X, MX = _svqb(X, M @ X)
    if X.shape[1] < bs:
        raise SolverError("initial block is rank deficient")
    AX = A @ X
    P = None
    it = 0
    mu = np.zeros(bs)
    best = np.full(k, np.inf)
    stale = 0
    recent: list = []
    status = "max-iterations"
    for it in range(1, max_iterations + 1):
        H = X.T @ AX
        mu, V = np.linalg.eigh((H + H.T) / 2)
        X = X @ V
        # fresh products: the updated ones drift by rounding on stiff pencils
        AX, MX = A @ X, M @ X
        R = AX - MX * mu
        Z = Msolve(R) if Msolve is not None else R
        rn = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, Z), 0)) / (np.abs(mu - shift) + 1)
        if history is not None:
            history.append(mu[:k].copy())
        active = rn > tol
        if not np.any(active[:k]):
            status = "tolerance"
            break
        improved = rn[:k] < 0.5 * best
        best = np.minimum(best, rn[:k])
        stale = 0 if np.any(improved & active[:k]) else stale + 1
        recent.append(mu[:k].copy())
        steady = len(recent) > patience and np.all(
            np.abs(recent[-1] - recent[-1 - patience]) <= 1e-11 * (np.abs(recent[-1] - shift) + 1))
        if stale >= patience and steady:
            status = "rounding-floor"
            break
        W = R[:, active]
        if T is not None:
            W = T(W)
        if P is not None:
            W = np.hstack([W, P])
        Q, MQ = _complement(X, MX, W, M)
        AQ = A @ Q
        S = np.hstack([X, Q])
        AS = np.hstack([AX, AQ])
        MS = np.hstack([MX, MQ])
        H = S.T @ AS
        w, V = np.linalg.eigh((H + H.T) / 2)
        V = V[:, :bs]
        P = Q @ V[bs:, :]
        X, AX, MX = S @ V, AS @ V, MS @ V
    return mu, X, it, status


def solve_lowest(pencil: AssembledPencil, k: int = 1, cfg: SolverConfig | None = None,
                 x0: np.ndarray | None = None) -> list[EigenResult]:
    """``k`` lowest eigenpairs by block LOBPCG on ``(K + cM, M)``.

    Non-converged pairs are returned with ``converged=False``; each result
    carries the quasimode enclosure computed on the shifted pencil.
    """
    cfg = cfg or SolverConfig()
    bs = cfg.block_size or k + 4
    if k < 1 or k > bs - 2:
        raise ValueError(f"need 1 <= k <= block_size - 2, got k={k}, block_size={bs}")
    n = pencil.n
    if n <= 4 * bs + 20:
        return _dense_results(pencil, k)
    c = _shift(pencil, cfg)
    A = pencil.shifted(c)
    M = pencil.M
    # symmetric diagonal scaling by M: graded meshes otherwise spread the
    # mass entries over many orders of magnitude
    s = 1.0 / np.sqrt(M.diagonal())
    S = sp.diags(s)
    As, Ms = (S @ A @ S).tocsr(), (S @ M @ S).tocsr()
    T = _preconditioner(As, cfg.preconditioner)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, bs))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(n, -1)
        X[:, : x0.shape[1]] = x0[:, :bs] / s[:, None]
    Mlu = sla.splu(Ms.tocsc())
    hist: list = []
    mu, X, iters, status = lobpcg(As, Ms, X, T=(T.matmat if T is not None else None), tol=cfg.tolerance,
                          max_iterations=cfg.max_iterations, n_wanted=k, Msolve=Mlu.solve, shift=c,
                          history=hist)
    if cfg.debug:
        # Ritz values may only rise by the rounding error of x^T A x
        H = np.asarray(hist)
        Xa = np.abs(X[:, :k])
        slack = 1e3 * np.finfo(float).eps * np.einsum("ij,ij->j", Xa, abs(As) @ Xa)
        if np.any(np.diff(H, axis=0) > 1e-12 * (np.abs(H[:-1]) + 1) + slack):
            raise SolverError("Ritz values increased between iterations")
    mu, X = mu[:k], X[:, :k]
    lam = mu - c
    R = As @ X - (Ms @ X) * mu
    res = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, Mlu.solve(R)), 0)) / (np.abs(lam) + 1)
    Alu = sla.splu(As.tocsc())
    out = []
    for j in range(k):
        cert = certify_quasimode(As, Ms, X[:, j], mu[j], Alu.solve)
        ok = res[j] <= cfg.tolerance or (status == "rounding-floor" and res[j] <= math.sqrt(cfg.tolerance))
        r = _result(lam[j], s * X[:, j], res[j], cert, c, ok)
        r.iterations = iters
        r.status = status if ok or status != "tolerance" else "max-iterations"
        out.append(r)
    return out


def _result(lam, x, res, cert: Certificate, c, converged) -> EigenResult:
    if cert.interval is None:
        enc = (-math.inf, math.inf)
    else:
        enc = (min(cert.interval[0] - c, lam), max(cert.interval[1] - c, lam))
    return EigenResult(value=float(lam), vector=x, residual=float(res), enclosure=enc,
                       converged=bool(converged), epsilon=cert.epsilon)


def dense_solve(pencil: AssembledPencil, vectors: bool = False):
    """All eigenvalues of a small pencil, by Cholesky of ``M`` and a symmetric eigensolver."""
    n = pencil.n
    if n > DENSE_LIMIT:
        raise ValueError(f"dense_solve refuses dimension {n} > {DENSE_LIMIT}")
    K = pencil.K.toarray() if sp.issparse(pencil.K) else np.asarray(pencil.K)
    M = pencil.M.toarray() if sp.issparse(pencil.M) else np.asarray(pencil.M)
    if vectors:
        return la.eigh(K, M)
    return la.eigh(K, M, eigvals_only=True)


def _dense_results(pencil: AssembledPencil, k: int) -> list[EigenResult]:
    w, V = dense_solve(pencil, vectors=True)
    c = 1.0 - pencil.lower_bound
    A = pencil.shifted(c)
    M = sp.csr_matrix(pencil.M)
    Mlu = sla.splu(M.tocsc())
    res = residual_norms(sp.csr_matrix(pencil.K), M, V[:, :k], w[:k], Mlu.solve)
    Alu = sla.splu(A.tocsc())
    out = [_result(w[j], V[:, j], res[j], certify_quasimode(A, M, V[:, j], w[j] + c, Alu.solve), c, True)
           for j in range(k)]
    for r in out:
        r.status = "dense"
    return out


# -- inertia ------------------------------------------------------------------------

def _dense_negatives(A: np.ndarray) -> tuple[int, int]:
    """(negative, zero) pivot counts from a Bunch-Kaufman ``L D L^T``."""
    _, D, _ = la.ldl(A, lower=True)
    neg = zero = 0
    i = 0
    n = D.shape[0]
    scale = max(np.abs(A).max(), 1.0)
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            ev = np.linalg.eigvalsh(D[i:i + 2, i:i + 2])
            step = 2
        else:
            ev = np.array([D[i, i]])
            step = 1
        neg += int(np.sum(ev < 0))
        zero += int(np.sum(np.abs(ev) <= 1e-14 * scale))
        i += step
    return neg, zero


def _layer_negatives(A: sp.csr_matrix, layers: np.ndarray) -> tuple[int, int]:
    """Inertia of a block tridiagonal matrix by block elimination.

    ``In(A) = In(S_1) + In(S_2) + ...`` for the successive Schur complements
    (Haynsworth); each pivot block is small and dense.
    """
    C = A.tocoo()
    if np.any(np.abs(layers[C.row] - layers[C.col]) > 1):
        raise ValueError("matrix is not block tridiagonal in the given layers")
    order = np.argsort(layers, kind="stable")
    A = A[order][:, order].tocsr()
    lay = layers[order]
    bounds = np.flatnonzero(np.diff(lay)) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [len(lay)]))
    neg = zero = 0
    S_prev = None
    B_prev = None
    scale = max(abs(A).max(), 1.0)
    for s, e in zip(starts, stops):
        D = A[s:e, s:e].toarray()
        if S_prev is not None:
            D = D - B_prev.T @ la.solve(S_prev, B_prev, assume_a="sym")
        ev = np.linalg.eigvalsh((D + D.T) / 2)
        neg += int(np.sum(ev < 0))
        zero += int(np.sum(np.abs(ev) <= 1e-13 * scale))
        if e < A.shape[0]:
            nxt = stops[np.searchsorted(starts, e)]
            S_prev, B_prev = D, A[s:e, e:nxt].toarray()
    return neg, zero


def _negatives(A, layers) -> tuple[int, int]:
    if A.shape[0] <= 2000 or layers is None:
        if A.shape[0] > DENSE_LIMIT:
            raise ValueError("no layer structure for a large matrix")
        return _dense_negatives(A.toarray() if sp.issparse(A) else np.asarray(A))
    return _layer_negatives(sp.csr_matrix(A), np.asarray(layers))


@dataclass(frozen=True)
class InertiaCount:
    count: int
    threshold: float
    perturbation: float = 0.0

    def __int__(self):
        return self.count


def inertia_count(pencil: AssembledPencil, threshold: float) -> InertiaCount:
    """Number of eigenvalues of ``(K, M)`` strictly below ``threshold``.

    Sylvester: this equals the number of negative eigenvalues of
    ``K - threshold M``.  A (numerically) singular shift is retried with the
    threshold moved down by ``1e-9 (|t| + 1)``, and the move is reported.
    """
    if threshold <= pencil.lower_bound:
        return InertiaCount(0, threshold)
    layers = pencil.dof_map[:, 0] if pencil.dof_map is not None and len(pencil.dof_map) == pencil.n else None
    t = threshold
    for attempt in range(4):
        A = (pencil.K - t * pencil.M)
        neg, zero = _negatives(A, layers)
        if zero == 0:
            return InertiaCount(neg, threshold, t - threshold)
        t = threshold - 1e-9 * (abs(threshold) + 1) * 10**attempt
        log.info("singular pivot at threshold %r, retrying at %r", threshold, t)
    raise SolverError(f"inertia count at {threshold} hit singular pivots repeatedly")


# -- quasimode certificate ---------------------------------------------------------

def certify_quasimode(T, M, u: np.ndarray, lam: float, Tsolve=None) -> Certificate:
    """Distance-to-spectrum bound for ``T x = mu M x`` with ``T`` positive definite.

    ``eps = ||T^{-1/2}(T - lam M) u|| / ||T^{1/2} u||`` in the ``M`` geometry,
    which reduces to ``r^T T^{-1} r / u^T T u`` with ``r = (T - lam M) u``; when ``eps < 1`` some eigenvalue ``mu`` satisfies
    ``|mu - lam| <= eps lam / (1 - eps)``.
    """
    u = np.asarray(u, dtype=float)
    if not lam > 0:
        raise ValueError("the certificate needs lam > 0")
    if not np.any(u):
        raise ValueError("u must be nonzero")
    Tu = T @ u
    r = Tu - lam * (M @ u)
    if Tsolve is None:
        if sp.issparse(T):
            Tsolve = sla.factorized(sp.csc_matrix(T))
        else:
            cf = la.cho_factor(T)
            Tsolve = lambda b: la.cho_solve(cf, b)  # noqa: E731
    num = float(r @ Tsolve(r))
    den = float(u @ Tu)
    if den <= 0:
        raise SolverError("operator is not positive definite on u")
    eps = math.sqrt(max(num, 0.0) / den)
    if eps >= 1.0:
        return Certificate(eps, None)
    w = eps * lam / (1.0 - eps)
    return Certificate(eps, (max(lam - w, 0.0), lam + w))
