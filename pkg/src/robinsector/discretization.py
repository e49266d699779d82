"""Conforming bilinear finite elements for Robin sectors and star graphs.

The sector form in polar coordinates, with ``v = sqrt(r) u``, reads

    q(v) = int |v_r|^2 - |v|^2/(4 r^2) + |v_theta|^2/r^2  dr dtheta
           - gamma int |v(r, +-alpha)|^2 / r dr.

The elements are bilinear in ``u = v / sqrt(r)`` on a tensor grid in
``(r, theta)``; in that variable the form is
``int (u_r^2 + u_theta^2 / r^2) r dr dtheta - gamma int u(r, +-alpha)^2 dr``
with mass ``int u^2 r dr dtheta``.  The vertex ``r = 0`` carries a single
unknown, so the discrete space is a subspace of ``H^1`` of the sector and
every discrete eigenvalue is a min-max upper bound for the truncated problem.
A positive ``r_min`` instead imposes a Dirichlet condition on the arc
``r = r_min``; the outer arc ``r = r_max`` is always Dirichlet.

Unknowns are ordered by radial layer, angle fastest, so the pencils are block
tridiagonal in ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .pencil import AssembledPencil, ConfigurationError, symmetrize_exact

PARITIES = ("even", "odd", "full")


@dataclass(frozen=True)
class SectorProblem:
    alpha: float
    gamma: float = 1.0
    parity: str = "even"

    def __post_init__(self):
        if not 0 < self.alpha < math.pi / 2:
            raise ConfigurationError(f"alpha must lie in (0, pi/2), got {self.alpha}")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.parity not in PARITIES:
            raise ConfigurationError(f"parity must be one of {PARITIES}")

    @property
    def ground_energy(self) -> float:
        return -self.gamma**2 / math.sin(self.alpha) ** 2


@dataclass(frozen=True)
class PolarGrid:
    """Tensor grid; ``n_r`` and ``n_theta`` count elements.

    ``grading`` is the ratio of consecutive radial element lengths, so nodes
    concentrate near ``r_min``.  ``r_min = 0`` puts a vertex node at the origin.
    ``theta_grading`` does the same in angle towards the Robin side of a
    sector, and towards both rays bounding each gap of a star graph.
    """

    r_min: float
    r_max: float
    n_r: int
    grading: float = 1.0
    n_theta: int = 8
    theta_grading: float = 1.0

    def __post_init__(self):
        if self.r_min < 0 or not self.r_max > self.r_min:
            raise ConfigurationError(f"need 0 <= r_min < r_max, got {self.r_min}, {self.r_max}")
        if self.n_r < 8 or self.n_theta < 4:
            raise ConfigurationError("need n_r >= 8 and n_theta >= 4")
        if not (self.grading >= 1.0 and self.theta_grading >= 1.0):
            raise ConfigurationError("grading ratios must be >= 1")

    def radial_nodes(self) -> np.ndarray:
        k = np.arange(self.n_r)
        if self.grading == 1.0:
            h = np.ones(self.n_r)
        else:
            h = self.grading ** k.astype(float)
        nodes = np.concatenate(([0.0], np.cumsum(h)))
        nodes = self.r_min + (self.r_max - self.r_min) * nodes / nodes[-1]
        nodes[-1] = self.r_max
        return nodes

    def refined(self) -> "PolarGrid":
        """Bisect every element; the element space of ``self`` is nested in the result."""
        return replace(self, n_r=2 * self.n_r, n_theta=2 * self.n_theta, grading=math.sqrt(self.grading),
                       theta_grading=math.sqrt(self.theta_grading))

    def theta_fractions(self) -> np.ndarray:
        """Angular nodes on ``[0, 1]``, finest next to 1."""
        h = self.theta_grading ** -np.arange(self.n_theta, dtype=float)
        t = np.concatenate(([0.0], np.cumsum(h)))
        t /= t[-1]
        t[-1] = 1.0
        return t


def build_grid(r_min: float = 0.0, r_max: float = 25.0, n_r: int = 200, grading: float = 1.0,
               n_theta: int = 8, theta_grading: float = 1.0) -> PolarGrid:
    return PolarGrid(r_min=r_min, r_max=r_max, n_r=int(n_r), grading=float(grading), n_theta=int(n_theta),
                     theta_grading=float(theta_grading))


# -- one-dimensional element matrices -------------------------------------------------

def _assemble_1d(nodes: np.ndarray, local: np.ndarray, periodic: bool = False) -> sp.csr_matrix:
    """Scatter per-element 2x2 blocks ``local[e]`` into a global matrix."""
    ne = local.shape[0]
    n = len(nodes) - (1 if periodic else 0)
    i0 = np.arange(ne)
    i1 = (i0 + 1) % n if periodic else i0 + 1
    rows = np.concatenate([i0, i0, i1, i1])
    cols = np.concatenate([i0, i1, i0, i1])
    vals = np.concatenate([local[:, 0, 0], local[:, 0, 1], local[:, 1, 0], local[:, 1, 1]])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _pair(d0, off, d1):
    return np.stack([np.stack([d0, off], -1), np.stack([off, d1], -1)], -2)


def stiffness_1d(nodes, weight_r=False, periodic=False):
    """``int w phi_i' phi_j'`` with ``w = r`` or ``w = 1``."""
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    c = (a + b) / (2 * h) if weight_r else 1.0 / h
    return _assemble_1d(nodes, _pair(c, -c, c), periodic)


def mass_1d(nodes, weight_r=False, periodic=False):
    """``int w phi_i phi_j`` with ``w = r`` or ``w = 1``."""
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    if weight_r:
        loc = _pair(h * (3 * a + b) / 12, h * (a + b) / 12, h * (a + 3 * b) / 12)
    else:
        loc = _pair(h / 3, h / 6, h / 3)
    return _assemble_1d(nodes, loc, periodic)


def _log_moments(x):
    """``J_k(x) = int_0^x s^k / (1 + s) ds`` for k = 0, 1, 2, cancellation-free."""
    x = np.asarray(x, dtype=float)
    J0 = np.log1p(x)
    J1 = x - J0
    J2 = x * x / 2 - x + J0
    small = x < 0.05
    if np.any(small):
        xs = x[small]
        k = np.arange(2, 16)[:, None]
        J1[small] = np.sum((-1.0) ** k * xs ** k / k, axis=0)
        k = np.arange(3, 17)[:, None]
        J2[small] = np.sum((-1.0) ** (k + 1) * xs ** k / k, axis=0)
    return J0, J1, J2


def inverse_r_mass_1d(nodes):
    """``int phi_i phi_j / r dr``, integrated in closed form.

    On an element touching ``r = 0`` the left diagonal entry diverges; it is
    set to zero because it only ever multiplies angular derivatives of the
    collapsed vertex unknown, which vanish.
    """
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    d0 = np.zeros_like(h)
    off = np.full_like(h, 0.5)
    d1 = np.full_like(h, 0.5)
    pos = a > 0
    x = h[pos] / a[pos]
    J0, J1, J2 = _log_moments(x)
    d1[pos] = J2 / x**2
    off[pos] = J1 / x - J2 / x**2
    d0[pos] = J0 - 2 * J1 / x + J2 / x**2
    return _assemble_1d(nodes, _pair(d0, off, d1))


# -- restriction of the tensor space to the free unknowns ----------------------------

def _restriction(n_layers: int, n_ang: int, vertex: bool, drop_first_layer: bool,
                 drop_ang: tuple[int, ...] = ()):
    """Prolongation ``P`` from free unknowns to tensor nodes, and the dof map.

    Layer ``n_layers - 1`` (r = r_max) is always removed.
    """
    keep_ang = [j for j in range(n_ang) if j not in drop_ang]
    cols, rows, dof = [], [], []
    k = 0
    first = 0
    if vertex:
        for j in range(n_ang):
            rows.append(j)
            cols.append(k)
        dof.append((0, -1))
        k += 1
        first = 1
    elif drop_first_layer:
        first = 1
    for i in range(first, n_layers - 1):
        for j in keep_ang:
            rows.append(i * n_ang + j)
            cols.append(k)
            dof.append((i, j))
            k += 1
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_layers * n_ang, k))
    return P, np.array(dof, dtype=int).reshape(-1, 2)


def _tensor_pencil(r_nodes, th_nodes, line_nodes, gamma, periodic, vertex, drop_first_layer,
                   drop_ang=()):
    Ar = stiffness_1d(r_nodes, weight_r=True)
    Mr = mass_1d(r_nodes, weight_r=True)
    Br = inverse_r_mass_1d(r_nodes)
    Wr = mass_1d(r_nodes)
    At = stiffness_1d(th_nodes, periodic=periodic)
    Mt = mass_1d(th_nodes, periodic=periodic)
    n_ang = At.shape[0]
    E = sp.csr_matrix((np.ones(len(line_nodes)), (line_nodes, line_nodes)), shape=(n_ang, n_ang))
    K = sp.kron(Ar, Mt) + sp.kron(Br, At) - gamma * sp.kron(Wr, E)
    M = sp.kron(Mr, Mt)
    P, dof = _restriction(len(r_nodes), n_ang, vertex, drop_first_layer, drop_ang)
    K = symmetrize_exact(P.T @ K @ P)
    M = symmetrize_exact(P.T @ M @ P)
    return K, M, dof


def assemble_sector(p: SectorProblem, g: PolarGrid) -> AssembledPencil:
    """Pencil of the Robin Laplacian on the sector truncated at ``r_max``.

    ``even``: angle in (0, alpha), natural condition on the bisector.
    ``full``: angle in (-alpha, alpha), Robin on both sides.
    ``odd``: angle in (0, alpha), Dirichlet on the bisector.
    """
    r_nodes = g.radial_nodes()
    vertex = g.r_min == 0.0
    half = p.alpha * g.theta_fractions()
    if p.parity == "full":
        th = np.concatenate((-half[:0:-1], half))
        line = [0, len(th) - 1]
    else:
        th = half
        line = [len(th) - 1]
    drop_ang = (0,) if p.parity == "odd" else ()
    # an odd function vanishes at the vertex
    K, M, dof = _tensor_pencil(r_nodes, th, line, p.gamma, False,
                               vertex and p.parity != "odd", not vertex or p.parity == "odd", drop_ang)
    lower = -p.gamma**2 if p.parity == "odd" else p.ground_energy
    meta = {
        "kind": "sector", "alpha": p.alpha, "gamma": p.gamma, "parity": p.parity,
        "r_min": g.r_min, "r_max": g.r_max, "n_r": g.n_r, "n_theta": g.n_theta,
        "grading": g.grading, "theta_grading": g.theta_grading, "r_nodes": r_nodes, "theta_nodes": th,
    }
    return AssembledPencil(K=K, M=M, lower_bound=lower, dof_map=dof, meta=meta)


def _symmetric_fractions(k: int, grading: float) -> np.ndarray:
    """``k`` elements on ``[0, 1]``, geometric towards both ends."""
    half = grading ** np.minimum(np.arange(k), np.arange(k)[::-1]).astype(float)
    t = np.concatenate(([0.0], np.cumsum(half)))
    return t / t[-1]


def star_theta_nodes(angles, n_theta: int, grading: float = 1.0) -> np.ndarray:
    """Angular nodes on ``[0, 2 pi)`` containing every ray angle.

    Each gap receives a number of elements proportional to its length, at
    least two, graded by ``grading`` towards its bounding rays.
    """
    ang = np.asarray(angles, dtype=float)
    M = len(ang)
    if M == 0:
        raise ConfigurationError("a star graph needs at least one ray")
    if np.any(np.diff(ang) <= 0) or ang[0] < 0 or ang[-1] >= 2 * math.pi:
        raise ConfigurationError("ray angles must be strictly increasing in [0, 2 pi)")
    ends = np.append(ang[1:], ang[0] + 2 * math.pi)
    nodes = []
    for start, stop in zip(ang, ends):
        k = max(2, int(round(n_theta * (stop - start) / (2 * math.pi))))
        nodes.extend(start + (stop - start) * _symmetric_fractions(k, grading)[:-1])
    return np.array(nodes)


def star_lower_bound(angles, gamma: float) -> float:
    """Bottom of the decoupled sector operator: ``-gamma^2 / (4 sin^2 beta_min)``."""
    ang = np.asarray(angles, dtype=float)
    gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    beta = gaps.min() / 2
    if beta >= math.pi / 2:
        return -gamma**2 / 4
    return -gamma**2 / (4 * math.sin(beta) ** 2)


def assemble_stargraph(angles, gamma: float, g: PolarGrid) -> AssembledPencil:
    """Pencil of ``-Delta - gamma delta_Gamma`` on the disc of radius ``r_max``.

    ``g.n_theta`` is the number of angular elements around the full circle.
    """
    if not gamma > 0:
        raise ConfigurationError("gamma must be positive")
    th = star_theta_nodes(angles, g.n_theta, g.theta_grading)
    th_closed = np.append(th, 2 * math.pi + th[0])
    ang = np.asarray(angles, dtype=float)
    line = [int(np.argmin(np.abs(th - a))) for a in ang]
    r_nodes = g.radial_nodes()
    vertex = g.r_min == 0.0
    K, M, dof = _tensor_pencil(r_nodes, th_closed, line, gamma, True, vertex, not vertex)
    meta = {
        "kind": "star", "angles": [float(a) for a in ang], "gamma": gamma,
        "r_min": g.r_min, "r_max": g.r_max, "n_r": g.n_r, "n_theta": g.n_theta,
        "grading": g.grading, "theta_grading": g.theta_grading, "r_nodes": r_nodes, "theta_nodes": th,
    }
    return AssembledPencil(K=K, M=M, lower_bound=star_lower_bound(ang, gamma), dof_map=dof, meta=meta)


def nodal_values(pencil: AssembledPencil, x: np.ndarray) -> np.ndarray:
    """Expand a coefficient vector to ``u`` on the full (r, theta) node array.

    Dirichlet nodes are zero; the vertex value is copied to every angle.
    """
    r = pencil.meta["r_nodes"]
    th = pencil.meta["theta_nodes"]
    U = np.zeros((len(r), len(th)))
    dof = pencil.dof_map
    vert = dof[:, 1] < 0
    if np.any(vert):
        U[0, :] = x[vert][0]
    U[dof[~vert, 0], dof[~vert, 1]] = x[~vert]
    return U
