"""Deterministic small-scale reference computations.

Builds sector-restricted sparse matrices of the commutator engines,
computes spectral norms (signed and absolute variants), and evaluates
the exact worst-case second-order Trotter error by dense linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse
import scipy.sparse.linalg

from . import _kernels
from .commutators import VtvEngine, VttEngine
from .determinants import enumerate_sector, occupied_list
from .errors import CapacityError, ConvergenceError

# Dense eigendecomposition workspace ceiling for exact_trotter_error.
DENSE_SECTOR_LIMIT = 5000
# Sparse builds beyond this row count are refused.
SPARSE_SECTOR_LIMIT = 3_000_000
_BUILD_CHUNK = 4096


@dataclass
class SectorMatrix:
    """Sparse symmetric sector matrix of a commutator (or its abs variant)."""

    basis: np.ndarray  # sorted uint64 determinants
    matrix: scipy.sparse.csr_matrix
    absolute_variant: bool

    @property
    def dimension(self):
        return len(self.basis)

    def to_dense(self):
        return self.matrix.toarray()

    def dump_matrix_market(self, path):
        scipy.io.mmwrite(path, scipy.sparse.coo_matrix(self.matrix))


def sector_basis(engine, sector):
    dets = enumerate_sector(engine.hamiltonian.n_spatial, sector)
    return np.array(dets, dtype=np.uint64)


def build_sector_matrix(engine, sector, absolute=False):
    """Assemble every nonzero A_ij (or |A_ij|) over the sector basis."""
    basis = sector_basis(engine, sector)
    dim = len(basis)
    if dim > SPARSE_SECTOR_LIMIT:
        raise CapacityError(f"sector dimension {dim} exceeds sparse build limit")
    max_row = engine.max_row_entries(int(basis[0])) if dim else 1
    blocks = []
    for start in range(0, dim, _BUILD_CHUNK):
        chunk = basis[start : start + _BUILD_CHUNK]
        if isinstance(engine, VtvEngine):
            rows, cols, vals = _kernels.build_rows_vtv(
                chunk, start, basis, engine.hopping, engine.coulomb,
                engine.n_so, max_row, absolute,
            )
        else:
            rows, cols, vals = _kernels.build_rows_vtt(
                chunk, start, basis, engine.scalar, engine.h1,
                engine.antisym, engine.n_so, max_row, absolute,
            )
        blocks.append((rows, cols, vals))
    rows = np.concatenate([b[0] for b in blocks]) if blocks else np.empty(0, int)
    cols = np.concatenate([b[1] for b in blocks]) if blocks else np.empty(0, int)
    vals = np.concatenate([b[2] for b in blocks]) if blocks else np.empty(0)
    mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return SectorMatrix(basis=basis, matrix=mat, absolute_variant=absolute)


_DENSE_NORM_LIMIT = 600


def _dense_norm(mat):
    w = np.linalg.eigvalsh(mat.toarray() if scipy.sparse.issparse(mat) else mat)
    if len(w) == 0:
        return 0.0
    return float(max(abs(w[0]), abs(w[-1])))


def spectral_norm(sector_matrix, tol=1e-8):
    """Largest-magnitude eigenvalue of the symmetric sector matrix.

    Uses Lanczos (ARPACK) with a deterministic start vector; a strictly
    positive start is used for absolute matrices, whose dominant
    eigenvector is non-negative by Perron-Frobenius.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mat = sector_matrix.matrix
    dim = mat.shape[0]
    if dim == 0:
        return 0.0
    if mat.nnz == 0:
        return 0.0
    if dim <= _DENSE_NORM_LIMIT:
        return _dense_norm(mat)
    if sector_matrix.absolute_variant:
        v0 = np.ones(dim)
        which = ["LA"]
    else:
        v0 = np.cos(0.7 * np.arange(dim)) + 1.1  # fixed, fully occupied start
        which = ["LA", "SA"]
    best = 0.0
    try:
        for w in which:
            vals = scipy.sparse.linalg.eigsh(
                mat, k=1, which=w, v0=v0, tol=tol, maxiter=10 * dim
            )[0]
            best = max(best, float(abs(vals[0])))
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        est = max(
            (abs(float(v)) for v in np.atleast_1d(exc.eigenvalues)), default=best
        )
        raise ConvergenceError(
            "Lanczos failed to converge", best_estimate=max(best, est)
        ) from exc
    return best


def engine_norm(engine, sector, absolute=False, tol=1e-8):
    """Convenience: build the sector matrix and return its spectral norm."""
    return spectral_norm(build_sector_matrix(engine, sector, absolute), tol=tol)


def _one_body_sector_matrix(matrix, basis):
    """Dense sector matrix of sum_ij M_ij a+_i a_j."""
    dim = len(basis)
    index = {int(d): a for a, d in enumerate(basis)}
    n_so = matrix.shape[0]
    out = np.zeros((dim, dim))
    for col, d_u in enumerate(basis):
        d = int(d_u)
        occ = occupied_list(d)
        out[col, col] = sum(matrix[p, p] for p in occ)
        for i in occ:
            for j in range(n_so):
                if j == i or (d >> j) & 1 or matrix[i, j] == 0.0:
                    continue
                d2 = d ^ (1 << i) | (1 << j)
                row = index.get(d2)
                if row is not None:
                    lo, hi = (i, j) if i < j else (j, i)
                    between = d & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
                    sign = -1.0 if bin(between).count("1") % 2 else 1.0
                    out[row, col] += sign * matrix[i, j]
    return out


def _coulomb_sector_diagonal(matrix, basis):
    """Diagonal of sum_{i<j} V_ij n_i n_j over the sector basis."""
    vals = np.empty(len(basis))
    for a, d_u in enumerate(basis):
        occ = occupied_list(int(d_u))
        acc = 0.0
        for x, p in enumerate(occ):
            for q in occ[x + 1 :]:
                acc += matrix[p, q]
        vals[a] = acc
    return vals


class TrotterErrorCalculator:
    """Exact worst-case error of the second-order product formula on a sector.

    Caches the Hermitian eigendecompositions of T and H so that the error
    can be evaluated cheaply on a grid of times.
    """

    def __init__(self, hamiltonian, sector):
        basis = np.array(
            enumerate_sector(hamiltonian.n_spatial, sector), dtype=np.uint64
        )
        if len(basis) > DENSE_SECTOR_LIMIT:
            raise CapacityError(
                f"sector dimension {len(basis)} exceeds dense limit "
                f"{DENSE_SECTOR_LIMIT}"
            )
        t_mat = _one_body_sector_matrix(hamiltonian.hopping, basis)
        self.v_diag = _coulomb_sector_diagonal(hamiltonian.coulomb, basis)
        self.t_eigvals, self.t_eigvecs = np.linalg.eigh(t_mat)
        h_mat = t_mat + np.diag(self.v_diag)
        self.h_eigvals, self.h_eigvecs = np.linalg.eigh(h_mat)

    def _expi(self, eigvals, eigvecs, t):
        return (eigvecs * np.exp(-1j * t * eigvals)) @ eigvecs.conj().T

    def error(self, t, ordering="VTV"):
        """Spectral norm of S2(t) - exp(-iHt)."""
        if t == 0.0:
            return 0.0
        exp_t = self._expi(self.t_eigvals, self.t_eigvecs, t)
        exp_h = self._expi(self.h_eigvals, self.h_eigvecs, t)
        if ordering.upper() == "VTV":
            half_v = np.exp(-1j * t / 2 * self.v_diag)
            s2 = half_v[:, None] * exp_t * half_v[None, :]
        elif ordering.upper() == "TVT":
            exp_th = self._expi(self.t_eigvals, self.t_eigvecs, t / 2)
            s2 = exp_th @ (np.exp(-1j * t * self.v_diag)[:, None] * exp_th)
        else:
            raise ValueError("ordering must be VTV or TVT")
        return float(np.linalg.norm(s2 - exp_h, 2))


def exact_trotter_error(hamiltonian, sector, t, ordering="VTV"):
    """One-shot wrapper around :class:`TrotterErrorCalculator`."""
    return TrotterErrorCalculator(hamiltonian, sector).error(t, ordering)
