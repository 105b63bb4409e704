#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths on representative inputs: the fixed-step RK4
march, the cyclic Jacobi eigensolver and the Cholesky factorization.
Both kernel modules are imported directly, so the NEURODYN_BACKEND flag
does not matter here.

Usage: python benchmarks/bench_backends.py [--steps N] [--n-march N] [--n-eig N]
"""

import argparse
import time

import numpy as np

from neurodyn import _kernels_numba as kernels_numba
from neurodyn import _kernels_numpy as kernels_numpy


def _time(fn, repeats=5):
    fn()  # warmup (triggers JIT compilation for the numba module)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def march_case(n, steps, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    mass = A.T @ A + np.eye(n)
    L, ok = kernels_numpy.chol_factor(mass)
    assert ok
    gamma = 1000.0
    P = gamma * (A.T @ A)
    q = gamma * (A.T @ rng.standard_normal(n))
    x0 = rng.uniform(-2, 2, n)
    out = np.empty((steps + 1, n))
    return L, P, q, x0, out


def eig_case(n, seed=0):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    return 0.5 * (S + S.T)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000, help="RK4 march length")
    ap.add_argument("--n-march", type=int, default=3, help="state dimension for the march")
    ap.add_argument("--n-eig", type=int, default=48, help="matrix size for the eigensolver")
    args = ap.parse_args()

    rows = []

    L, P, q, x0, out = march_case(args.n_march, args.steps)
    for name, mod in (("numba", kernels_numba), ("numpy", kernels_numpy)):
        dt = _time(lambda m=mod: m.rk4_march_chol(L, P, q, x0, 1e-4, args.steps, args.steps, out, 1e12))
        rows.append((f"rk4_march n={args.n_march} steps={args.steps}", name, dt))

    S = eig_case(args.n_eig)
    for name, mod in (("numba", kernels_numba), ("numpy", kernels_numpy)):
        dt = _time(lambda m=mod: m.jacobi_eigh(S, 1e-12, 100))
        rows.append((f"jacobi_eigh n={args.n_eig}", name, dt))

    M = S @ S.T + np.eye(args.n_eig)
    for name, mod in (("numba", kernels_numba), ("numpy", kernels_numpy)):
        dt = _time(lambda m=mod: m.chol_factor(M))
        rows.append((f"chol_factor n={args.n_eig}", name, dt))

    print(f"{'case':<34} {'backend':<8} {'best (s)':>12} {'vs numba':>10}")
    print("-" * 68)
    baseline = {}
    for case, name, dt in rows:
        if name == "numba":
            baseline[case] = dt
        print(f"{case:<34} {name:<8} {dt:>12.6f} {dt / baseline[case]:>8.1f}x")


if __name__ == "__main__":
    main()
