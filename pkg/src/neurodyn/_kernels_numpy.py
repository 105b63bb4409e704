"""Pure-numpy fallback for the hot kernels.

Same function signatures and contracts as ``_kernels_numba``, written
with vectorized array operations so the fallback stays usable without a
JIT.  The RK4 march premultiplies the factored mass-matrix inverse into
the drive terms once, which turns every stage into a single matvec; the
stage arithmetic is otherwise the classical RK4 update.
"""

import numpy as np


def chol_factor(S):
    """Lower Cholesky factor of S (assumed symmetric). Returns (L, ok)."""
    n = S.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = S[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:  # also catches NaN
            return L, False
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L, True


def chol_solve(L, r):
    """Solve (L L^T) x = r."""
    n = L.shape[0]
    x = np.empty(n)
    for i in range(n):
        x[i] = (r[i] - L[i, :i] @ x[:i]) / L[i, i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def lu_factor(A):
    """Row-pivoted LU, Doolittle form. Returns (LU, piv, ok)."""
    n = A.shape[0]
    LU = A.copy()
    piv = np.zeros(n, dtype=np.int64)
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        piv[k] = p
        amax = abs(LU[p, k])
        if amax == 0.0 or amax != amax:
            return LU, piv, False
        if p != k:
            LU[[k, p], :] = LU[[p, k], :]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    return LU, piv, True


def lu_solve(LU, piv, r):
    """Solve A x = r given the pivoted LU of A."""
    n = LU.shape[0]
    x = r.copy()
    # multipliers are stored in final row order: permute fully, then substitute
    for k in range(n):
        p = piv[k]
        if p != k:
            x[k], x[p] = x[p], x[k]
    for k in range(n):
        x[k + 1:] -= LU[k + 1:, k] * x[k]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - LU[i, i + 1:] @ x[i + 1:]) / LU[i, i]
    return x


def jacobi_eigh(S, tol, max_sweeps):
    """Cyclic Jacobi diagonalization of symmetric S.

    Returns (diagonal, accumulated rotations Q, sweeps used);
    eigenvalues are unsorted.  Termination matches the numba kernel:
    off-diagonal Frobenius norm <= tol * ||S||_F, at most max_sweeps.
    """
    n = S.shape[0]
    A = S.copy()
    Q = np.eye(n)
    thresh = tol * np.sqrt((S * S).sum())
    sweeps = 0
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * (np.triu(A, 1) ** 2).sum())
        if off <= thresh:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app = A[p, p]
                aqq = A[q, q]
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p] = rot_p
                A[:, q] = rot_q
                A[p, :] = rot_p
                A[q, :] = rot_q
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                rot_p = c * Q[:, p] - s * Q[:, q]
                rot_q = s * Q[:, p] + c * Q[:, q]
                Q[:, p] = rot_p
                Q[:, q] = rot_q
    return np.diag(A).copy(), Q, sweeps


def _factor_inverse(solve, n):
    eye = np.eye(n)
    return np.column_stack([solve(eye[:, j]) for j in range(n)])


def _rk4_affine(Pw, qw, x0, h, n_steps, stride, out, limit):
    x = x0.copy()
    out[0] = x
    rows = 1
    half = 0.5 * h
    sixth = h / 6.0
    for step in range(1, n_steps + 1):
        k1 = qw - Pw @ x
        k2 = qw - Pw @ (x + half * k1)
        k3 = qw - Pw @ (x + half * k2)
        k4 = qw - Pw @ (x + h * k3)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(x) < limit):
            return rows, 1, step
        if step % stride == 0:
            out[rows] = x
            rows += 1
    if n_steps % stride != 0:
        out[rows] = x
        rows += 1
    return rows, 0, 0


def rk4_march_chol(L, P, q, x0, h, n_steps, stride, out, limit):
    """Classical RK4 march of M xdot = q - P x with M = L L^T.

    Stores x at step 0, every stride-th step and the final step into the
    preallocated ``out``.  Returns (rows_written, status, bad_step);
    status 1 means a component left (-limit, limit) at bad_step.
    """
    W = _factor_inverse(lambda r: chol_solve(L, r), L.shape[0])
    return _rk4_affine(W @ P, W @ q, x0, h, n_steps, stride, out, limit)


def rk4_march_lu(LU, piv, P, q, x0, h, n_steps, stride, out, limit):
    """Same march as rk4_march_chol with an LU-factored mass matrix."""
    W = _factor_inverse(lambda r: lu_solve(LU, piv, r), LU.shape[0])
    return _rk4_affine(W @ P, W @ q, x0, h, n_steps, stride, out, limit)
