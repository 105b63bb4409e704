"""Self-contained dense real linear algebra on small matrices.

Everything is stored as C-contiguous float64 ndarrays (row-major),
adequate up to a few hundred unknowns.  The factorizations and the
symmetric eigensolver are hand-rolled (see the kernel modules); numpy is
used for array storage and elementwise arithmetic only, so this module
can serve as an independent reference against library decompositions.

All returned objects are immutable by convention and every function is
pure, so concurrent use needs no coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels

EPS = float(np.finfo(np.float64).eps)

SYMMETRY_RTOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class NotPositiveDefinite(ArithmeticError):
    """A pivot <= 0 turned up: the matrix is not a valid SPD mass matrix."""


class SingularMatrix(ArithmeticError):
    """Gaussian elimination hit a zero pivot column."""


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D float64 array (copying when needed)."""
    A = np.array(a, dtype=np.float64, order="C", copy=True)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={A.ndim}")
    if not np.isfinite(A).all():
        raise ValueError("matrix entries must be finite")
    return A


def as_vector(v) -> np.ndarray:
    """Coerce to a finite 1-D float64 array (copying when needed)."""
    x = np.array(v, dtype=np.float64, copy=True)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise ValueError("vector entries must be finite")
    return x


def mat_vec(A, x) -> np.ndarray:
    """Dense product A @ x with dimension checking."""
    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ ({x.shape[0]},)")
    return A @ x


def _require_square(A: np.ndarray) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def _symmetrized(S: np.ndarray) -> np.ndarray:
    """Check symmetry to SYMMETRY_RTOL (relative) and average out rounding."""
    scale = float(np.abs(S).max()) if S.size else 0.0
    if float(np.abs(S - S.T).max()) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular L with S = L @ L.T; diagonal strictly positive."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def cholesky(S) -> CholeskyFactor:
    """Cholesky factorization of a symmetric positive-definite matrix.

    Raises NotPositiveDefinite when a pivot fails to be positive, which
    is the signal that S cannot serve as an SPD mass matrix.
    """
    S = _symmetrized(_require_square(as_matrix(S)))
    L, ok = kernels.chol_factor(S)
    if not ok:
        raise NotPositiveDefinite("encountered a pivot <= 0 during factorization")
    return CholeskyFactor(lower=L)


def chol_solve(factor: CholeskyFactor, r) -> np.ndarray:
    """Solve S y = r given the Cholesky factor of S."""
    r = as_vector(r)
    if r.shape[0] != factor.dim:
        raise ValueError(f"dimension mismatch: factor dim {factor.dim}, rhs {r.shape[0]}")
    return kernels.chol_solve(factor.lower, r)


@dataclass(frozen=True)
class LUFactor:
    """Row-pivoted LU of a square matrix (Doolittle storage)."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def dim(self) -> int:
        return self.lu.shape[0]


def lu_factor(A) -> LUFactor:
    """Gaussian elimination with partial pivoting; raises SingularMatrix."""
    A = _require_square(as_matrix(A))
    LU, piv, ok = kernels.lu_factor(A)
    if not ok:
        raise SingularMatrix("zero pivot column: matrix is singular to working precision")
    return LUFactor(lu=LU, piv=piv)


def lu_solve(factor: LUFactor, r) -> np.ndarray:
    r = as_vector(r)
    if r.shape[0] != factor.dim:
        raise ValueError(f"dimension mismatch: factor dim {factor.dim}, rhs {r.shape[0]}")
    return kernels.lu_solve(factor.lu, factor.piv, r)


def solve(A, b) -> np.ndarray:
    """Solve A x = b by pivoted elimination plus one refinement pass."""
    A = _require_square(as_matrix(A))
    b = as_vector(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs ({b.shape[0]},)")
    factor = lu_factor(A)
    x = kernels.lu_solve(factor.lu, factor.piv, b)
    x += kernels.lu_solve(factor.lu, factor.piv, b - A @ x)
    return x


@dataclass(frozen=True)
class SymEigen:
    """Eigendecomposition S = Q diag(w) Q.T with w ascending, Q orthonormal."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # eigenvectors in columns, matching order


def sym_eigen(S) -> SymEigen:
    """Full eigendecomposition of a symmetric matrix via cyclic Jacobi."""
    S = _symmetrized(_require_square(as_matrix(S)))
    d, Q, _ = kernels.jacobi_eigh(S, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(d, kind="stable")
    return SymEigen(
        eigenvalues=np.ascontiguousarray(d[order]),
        eigenvectors=np.ascontiguousarray(Q[:, order]),
    )


def _default_rank_tol(A: np.ndarray) -> float:
    return math.sqrt(max(A.shape) * EPS)


def rank(A, tol: float | None = None) -> int:
    """Numerical rank: eigenvalues of A.T A exceeding tol^2 * lambda_max."""
    A = as_matrix(A)
    if tol is None:
        tol = _default_rank_tol(A)
    elif tol <= 0.0:
        raise ValueError("tol must be > 0")
    lam = sym_eigen(A.T @ A).eigenvalues
    lam_max = float(lam[-1])
    if lam_max <= 0.0:
        return 0
    return int(np.count_nonzero(lam > tol * tol * lam_max))


def null_space(A, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of A."""
    A = as_matrix(A)
    if tol is None:
        tol = _default_rank_tol(A)
    eig = sym_eigen(A.T @ A)
    lam_max = float(eig.eigenvalues[-1])
    keep = eig.eigenvalues <= tol * tol * lam_max if lam_max > 0.0 else np.ones(
        eig.eigenvalues.shape, dtype=bool
    )
    return np.ascontiguousarray(eig.eigenvectors[:, keep])


def least_squares(A, b) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution and the attained residual.

    Uses the eigendecomposition pseudo-inverse of A.T A, so it stays
    meaningful for singular and inconsistent systems; serves as the
    verification oracle for the degenerate dynamics.
    """
    A = as_matrix(A)
    b = as_vector(b)
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs ({b.shape[0]},)")
    eig = sym_eigen(A.T @ A)
    lam = eig.eigenvalues
    lam_max = float(lam[-1])
    tol2 = _default_rank_tol(A) ** 2
    coeff = eig.eigenvectors.T @ (A.T @ b)
    inv = np.zeros_like(lam)
    keep = lam > tol2 * lam_max if lam_max > 0.0 else np.zeros(lam.shape, dtype=bool)
    inv[keep] = 1.0 / lam[keep]
    x = eig.eigenvectors @ (coeff * inv)
    min_residual = float(np.linalg.norm(A @ x - b))
    return x, min_residual
