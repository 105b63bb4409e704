"""Hot numeric kernels, numba-compiled.

Loop-oriented implementations of the dense factorizations, the cyclic
Jacobi eigensolver and the fixed-step RK4 march.  Signatures match
``_kernels_numpy`` exactly; ``backend`` picks one of the two modules.

Factorization kernels report failure through a status flag instead of
raising, so the jitted code stays exception-free.
"""

import numpy as np
from numba import njit

_JIT = {"cache": True, "nogil": True}


@njit(**_JIT)
def chol_factor(S):
    """Lower Cholesky factor of S (assumed symmetric). Returns (L, ok)."""
    n = S.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            acc = S[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if not (acc > 0.0):  # also catches NaN
                    return L, False
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return L, True


@njit(**_JIT)
def chol_solve(L, r):
    """Solve (L L^T) x = r."""
    n = L.shape[0]
    x = np.empty(n)
    for i in range(n):
        acc = r[i]
        for k in range(i):
            acc -= L[i, k] * x[k]
        x[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]
    return x


@njit(**_JIT)
def lu_factor(A):
    """Row-pivoted LU, Doolittle form. Returns (LU, piv, ok)."""
    n = A.shape[0]
    LU = A.copy()
    piv = np.zeros(n, dtype=np.int64)
    for k in range(n):
        p = k
        amax = abs(LU[k, k])
        for i in range(k + 1, n):
            v = abs(LU[i, k])
            if v > amax:
                amax = v
                p = i
        piv[k] = p
        if amax == 0.0 or amax != amax:
            return LU, piv, False
        if p != k:
            for j in range(n):
                tmp = LU[k, j]
                LU[k, j] = LU[p, j]
                LU[p, j] = tmp
        for i in range(k + 1, n):
            LU[i, k] /= LU[k, k]
            for j in range(k + 1, n):
                LU[i, j] -= LU[i, k] * LU[k, j]
    return LU, piv, True


@njit(**_JIT)
def lu_solve(LU, piv, r):
    """Solve A x = r given the pivoted LU of A."""
    n = LU.shape[0]
    x = r.copy()
    # multipliers are stored in final row order: permute fully, then substitute
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
    for k in range(n):
        for i in range(k + 1, n):
            x[i] -= LU[i, k] * x[k]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, n):
            acc -= LU[i, k] * x[k]
        x[i] = acc / LU[i, i]
    return x


@njit(**_JIT)
def jacobi_eigh(S, tol, max_sweeps):
    """Cyclic Jacobi diagonalization of symmetric S.

    Sweeps the strict upper triangle until the off-diagonal Frobenius
    norm drops below tol * ||S||_F or max_sweeps is hit.  Returns
    (diagonal, accumulated rotations Q, sweeps used); eigenvalues are
    unsorted.
    """
    n = S.shape[0]
    A = S.copy()
    Q = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += S[i, j] * S[i, j]
    thresh = tol * np.sqrt(fro)
    sweeps = 0
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        if np.sqrt(off) <= thresh:
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
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * akq
                        A[p, k] = A[k, p]
                        A[k, q] = s * akp + c * akq
                        A[q, k] = A[k, q]
                for k in range(n):
                    qkp = Q[k, p]
                    qkq = Q[k, q]
                    Q[k, p] = c * qkp - s * qkq
                    Q[k, q] = s * qkp + c * qkq
    d = np.empty(n)
    for i in range(n):
        d[i] = A[i, i]
    return d, Q, sweeps


@njit(**_JIT)
def _stage_chol(L, P, q, xin, kout, tmp):
    # kout = (L L^T)^{-1} (q - P xin)
    n = q.shape[0]
    for i in range(n):
        acc = q[i]
        for k in range(n):
            acc -= P[i, k] * xin[k]
        tmp[i] = acc
    for i in range(n):
        acc = tmp[i]
        for k in range(i):
            acc -= L[i, k] * kout[k]
        kout[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = kout[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * kout[k]
        kout[i] = acc / L[i, i]


@njit(**_JIT)
def _stage_lu(LU, piv, P, q, xin, kout, tmp):
    # kout = A^{-1} (q - P xin) with A = P_piv L U
    n = q.shape[0]
    for i in range(n):
        acc = q[i]
        for k in range(n):
            acc -= P[i, k] * xin[k]
        tmp[i] = acc
    for k in range(n):
        p = piv[k]
        if p != k:
            t = tmp[k]
            tmp[k] = tmp[p]
            tmp[p] = t
    for k in range(n):
        for i in range(k + 1, n):
            tmp[i] -= LU[i, k] * tmp[k]
    for i in range(n - 1, -1, -1):
        acc = tmp[i]
        for k in range(i + 1, n):
            acc -= LU[i, k] * kout[k]
        kout[i] = acc / LU[i, i]


@njit(**_JIT)
def rk4_march_chol(L, P, q, x0, h, n_steps, stride, out, limit):
    """Classical RK4 march of M xdot = q - P x with M = L L^T.

    Every stage applies the Cholesky solve to the stage right-hand side.
    Stores x at step 0, every stride-th step and the final step into the
    preallocated ``out``.  Returns (rows_written, status, bad_step);
    status 1 means a component left (-limit, limit) at bad_step.
    """
    n = x0.shape[0]
    x = x0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xt = np.empty(n)
    tmp = np.empty(n)
    for i in range(n):
        out[0, i] = x[i]
    rows = 1
    for step in range(1, n_steps + 1):
        _stage_chol(L, P, q, x, k1, tmp)
        for i in range(n):
            xt[i] = x[i] + 0.5 * h * k1[i]
        _stage_chol(L, P, q, xt, k2, tmp)
        for i in range(n):
            xt[i] = x[i] + 0.5 * h * k2[i]
        _stage_chol(L, P, q, xt, k3, tmp)
        for i in range(n):
            xt[i] = x[i] + h * k3[i]
        _stage_chol(L, P, q, xt, k4, tmp)
        for i in range(n):
            x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(n):
            if not (abs(x[i]) < limit):
                return rows, 1, step
        if step % stride == 0:
            for i in range(n):
                out[rows, i] = x[i]
            rows += 1
    if n_steps % stride != 0:
        for i in range(n):
            out[rows, i] = x[i]
        rows += 1
    return rows, 0, 0


@njit(**_JIT)
def rk4_march_lu(LU, piv, P, q, x0, h, n_steps, stride, out, limit):
    """Same march as rk4_march_chol with an LU-factored mass matrix."""
    n = x0.shape[0]
    x = x0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xt = np.empty(n)
    tmp = np.empty(n)
    for i in range(n):
        out[0, i] = x[i]
    rows = 1
    for step in range(1, n_steps + 1):
        _stage_lu(LU, piv, P, q, x, k1, tmp)
        for i in range(n):
            xt[i] = x[i] + 0.5 * h * k1[i]
        _stage_lu(LU, piv, P, q, xt, k2, tmp)
        for i in range(n):
            xt[i] = x[i] + 0.5 * h * k2[i]
        _stage_lu(LU, piv, P, q, xt, k3, tmp)
        for i in range(n):
            xt[i] = x[i] + h * k3[i]
        _stage_lu(LU, piv, P, q, xt, k4, tmp)
        for i in range(n):
            x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(n):
            if not (abs(x[i]) < limit):
                return rows, 1, step
        if step % stride == 0:
            for i in range(n):
                out[rows, i] = x[i]
            rows += 1
    if n_steps % stride != 0:
        for i in range(n):
            out[rows, i] = x[i]
        rows += 1
    return rows, 0, 0
