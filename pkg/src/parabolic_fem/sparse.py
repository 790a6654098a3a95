"""Sparse matrices and the linear solvers used throughout the package.

Storage is compressed sparse row backed by :mod:`scipy.sparse`. The
iterative solvers (Jacobi-preconditioned CG and BiCGSTAB) and the dense
LU oracle are written out here so that each can be checked against the
others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "SolveReport",
    "SolverError",
    "ConvergenceError",
    "SingularMatrixError",
    "matvec",
    "solve_spd",
    "solve_general",
    "solve_dense_oracle",
    "DEFAULT_TOL",
    "DENSE_LIMIT",
]

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    """A linear solve could not produce an acceptable answer."""


class ConvergenceError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularMatrixError(SolverError):
    pass


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_rel: float
    converged: bool


class SparseMatrix:
    """Square CSR matrix.

    Column indices are sorted and duplicate entries summed on
    construction, so ``col_indices`` is strictly increasing inside each
    row.
    """

    __slots__ = ("_csr",)

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=float, copy=True)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got shape {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        csr.data.setflags(write=False)
        self._csr = csr

    @classmethod
    def from_csr(cls, n, row_offsets, col_indices, values):
        return cls(sp.csr_matrix((values, col_indices, row_offsets), shape=(n, n)))

    @classmethod
    def from_dense(cls, A):
        return cls(sp.csr_matrix(np.asarray(A, dtype=float)))

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(n, format="csr"))

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x):
        return matvec(self, x)

    def __add__(self, other):
        return SparseMatrix(self._csr + other._csr)

    def __sub__(self, other):
        return SparseMatrix(self._csr - other._csr)

    def __mul__(self, alpha):
        return SparseMatrix(float(alpha) * self._csr)

    __rmul__ = __mul__

    @property
    def T(self):
        return SparseMatrix(self._csr.T)

    def is_symmetric(self, tol=0.0) -> bool:
        diff = self._csr - self._csr.T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self._csr.nnz})"


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, "
                         f"vector has length {x.shape[0]}")
    return A.csr @ x


def _jacobi(A):
    d = A.diagonal()
    if np.any(d == 0.0):
        return np.ones_like(d)
    return 1.0 / d


def solve_spd(A: SparseMatrix, b, tol_rel: float = DEFAULT_TOL, x0=None,
              maxiter=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, report)`` with ``||A x - b|| <= tol_rel * ||b||``.
    Raises :class:`ConvergenceError` after ``4 n`` iterations without
    reaching the tolerance.
    """
    if not 0.0 < tol_rel < 1.0:
        raise ValueError(f"tol_rel must lie in (0, 1), got {tol_rel}")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({A.n},)")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(A.n), SolveReport(0, 0.0, True)
    maxiter = 4 * A.n if maxiter is None else maxiter
    Minv = _jacobi(A)
    csr = A.csr

    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=float)
    r = b - csr @ x
    rnorm = np.linalg.norm(r)
    k = 0
    if rnorm > tol_rel * bnorm:
        z = Minv * r
        p = z.copy()
        rz = r @ z
        while k < maxiter:
            Ap = csr @ p
            pAp = p @ Ap
            if pAp <= 0.0:
                raise ConvergenceError(
                    "matrix is not positive definite along a search direction",
                    SolveReport(k, rnorm / bnorm, False))
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            k += 1
            rnorm = np.linalg.norm(r)
            if rnorm <= tol_rel * bnorm:
                break
            z = Minv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    # the recursive residual drifts; confirm against the true one
    rel = np.linalg.norm(b - csr @ x) / bnorm
    report = SolveReport(k, rel, rel <= tol_rel)
    if not report.converged:
        raise ConvergenceError(
            f"CG did not reach tol {tol_rel:g} in {k} iterations "
            f"(relative residual {rel:.3e})", report)
    return x, report


def _bicgstab(A, b, tol_rel, maxiter):
    csr = A.csr
    Minv = _jacobi(A)
    bnorm = np.linalg.norm(b)
    x = np.zeros(A.n)
    r = b.copy()
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(A.n)
    p = np.zeros(A.n)
    for k in range(1, maxiter + 1):
        rho_new = r_hat @ r
        if rho_new == 0.0 or omega == 0.0:
            return x, k
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        y = Minv * p
        v = csr @ y
        denom = r_hat @ v
        if denom == 0.0:
            return x, k
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= tol_rel * bnorm:
            x += alpha * y
            return x, k
        z = Minv * s
        t = csr @ z
        tt = t @ t
        if tt == 0.0:
            return x + alpha * y, k
        omega = (t @ s) / tt
        x += alpha * y + omega * z
        r = s - omega * t
        rho = rho_new
        if np.linalg.norm(r) <= tol_rel * bnorm:
            return x, k
    return x, maxiter


def solve_general(A: SparseMatrix, b, tol_rel: float = DEFAULT_TOL):
    """Jacobi-preconditioned BiCGSTAB for nonsymmetric systems.

    When the iteration stalls on a system with at most ``DENSE_LIMIT``
    unknowns, the answer is taken from :func:`solve_dense_oracle`
    instead. Singular systems end in :class:`SolverError`.
    """
    if not 0.0 < tol_rel < 1.0:
        raise ValueError(f"tol_rel must lie in (0, 1), got {tol_rel}")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({A.n},)")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(A.n), SolveReport(0, 0.0, True)
    x, k = _bicgstab(A, b, tol_rel, 4 * A.n)
    rel = np.linalg.norm(b - A.csr @ x) / bnorm
    if rel <= tol_rel and np.all(np.isfinite(x)):
        return x, SolveReport(k, rel, True)
    if A.n <= DENSE_LIMIT:
        x = solve_dense_oracle(A.to_dense(), b)
        rel = np.linalg.norm(b - A.csr @ x) / bnorm
        if rel <= tol_rel:
            return x, SolveReport(k, rel, True)
    raise ConvergenceError(
        f"BiCGSTAB did not reach tol {tol_rel:g} (relative residual {rel:.3e})",
        SolveReport(k, rel, False))


def solve_dense_oracle(A, b) -> np.ndarray:
    """LU with partial pivoting on a dense copy of ``A``."""
    if isinstance(A, SparseMatrix):
        A = A.to_dense()
    LU = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    n = LU.shape[0]
    if LU.shape != (n, n) or x.shape[0] != n:
        raise ValueError("dimension mismatch in dense solve")
    if n > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to n <= {DENSE_LIMIT}, got {n}")
    for k in range(n):
        piv = k + int(np.argmax(np.abs(LU[k:, k])))
        if abs(LU[piv, k]) < 1e-14:
            raise SingularMatrixError(
                f"pivot {abs(LU[piv, k]):.3e} below 1e-14 in column {k}")
        if piv != k:
            LU[[k, piv]] = LU[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
        x[k + 1:] -= LU[k + 1:, k] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - LU[k, k + 1:] @ x[k + 1:]) / LU[k, k]
    return x
