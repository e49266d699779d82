"""Sparse symmetric pencils ``(K, M)`` shared by every discretization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class ConfigurationError(ValueError):
    """Invalid grid or problem parameters."""


@dataclass(frozen=True)
class AssembledPencil:
    """Stiffness form ``K`` and mass form ``M`` on a conforming subspace.

    ``lower_bound`` is an analytic lower bound of ``x^T K x / x^T M x`` that
    holds for the continuous problem and therefore for every conforming
    subspace.  ``dof_map`` maps each unknown to its node: a row of integer
    (radial layer, angular node) indices, with angular index -1 for the
    collapsed vertex unknown.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    lower_bound: float
    dof_map: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def shifted(self, c: float) -> sp.csr_matrix:
        return (self.K + c * self.M).tocsr()


def symmetrize_exact(A) -> sp.csr_matrix:
    """Bitwise-symmetric copy of ``A``: upper triangle mirrored onto the lower."""
    A = sp.csr_matrix(A)
    U = sp.triu(A, k=1)
    D = sp.diags(A.diagonal())
    return (U + U.T + D).tocsr()


def write_triplets(pencil: AssembledPencil, path_K, path_M) -> None:
    """Plain-text sparse triplets: header ``n nnz`` then ``i j value`` rows."""
    for A, path in ((pencil.K, path_K), (pencil.M, path_M)):
        C = sp.coo_matrix(A)
        order = np.lexsort((C.col, C.row))
        with open(path, "w", newline="\n") as fh:
            fh.write(f"{C.shape[0]} {C.nnz}\n")
            for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
                fh.write(f"{i} {j} {v:.17g}\n")


def read_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        n, nnz = (int(s) for s in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"{path}: header says {nnz} entries, found {data.shape[0]}")
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
