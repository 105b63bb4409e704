"""Fixed-step RK4 integration of ODE-classified neural models.

The mass matrix is factorized once (Cholesky when SPD, pivoted LU
otherwise) and every RK4 stage applies that factor to the stage
right-hand side.  A stability-derived step size makes runs reproducible
without adaptivity: the dynamics are linear with a known spectrum, so a
safety factor on the RK4 real-axis limit is all that is needed.

Also provides the exact modal solution of the error dynamics for the
gradient-flow kinds (IGNN, GNN), used as an oracle by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .backend import kernels
from .models import ModelKind, NeuralModel, SystemClass

RK4_REAL_AXIS_LIMIT = 2.78
STEP_SAFETY = 0.5
STEP_MIN = 1e-8
STEP_MAX = 1e-3
DIVERGENCE_LIMIT = 1e12
MAX_KEPT_SAMPLES = 5000

POWER_ITERATIONS = 50
POWER_TOL = 1e-8
_POWER_SEED = 0x5EED


class DaeNotIntegrable(RuntimeError):
    """The model is differential-algebraic: its mass matrix is singular."""


class FactorizationFailed(ArithmeticError):
    """Numerical breakdown while factoring a nominally invertible mass matrix."""


class NonFiniteState(FloatingPointError):
    """A state component overflowed during the march.

    Carries ``time`` (seconds at divergence) and ``h`` (the step used).
    """

    def __init__(self, message: str, time: float, h: float):
        super().__init__(message)
        self.time = time
        self.h = h


class UnsupportedKind(ValueError):
    """The closed-form error solution only exists for IGNN and GNN."""


@dataclass(frozen=True)
class SolvableModel:
    """An ODE-classified model with its mass factor and stable step.

    drive_matrix = gamma * K @ A and drive_vector = gamma * K @ b are
    premultiplied once so the marcher evaluates the right-hand side as
    drive_vector - drive_matrix @ x.
    """

    model: NeuralModel
    chol: linalg.CholeskyFactor | None
    lu: linalg.LUFactor | None
    stable_step: float
    drive_matrix: np.ndarray
    drive_vector: np.ndarray

    def solve_mass(self, r: np.ndarray) -> np.ndarray:
        """Apply the inverse of the mass matrix through the stored factor."""
        if self.chol is not None:
            return kernels.chol_solve(self.chol.lower, r)
        assert self.lu is not None
        return kernels.lu_solve(self.lu.lu, self.lu.piv, r)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one integration run.

    times (seconds, strictly increasing from 0), states (row per sample),
    residuals ||A x - b||_2 per sample, optional Lyapunov values, and a
    metadata dict (gamma, h, stride, model kind, seed, ...).
    """

    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    lyapunov: np.ndarray | None
    meta: dict

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _spectral_radius(solvable: SolvableModel) -> float:
    """Dominant eigenvalue magnitude of M^{-1} K A by power iteration.

    All four kinds produce a matrix similar to a symmetric positive
    semi-definite one, so the dominant eigenvalue is real and the
    Rayleigh quotient converges; a fixed seed keeps runs reproducible.
    """
    model = solvable.model
    ka = model.gain @ model.problem.A
    n = ka.shape[0]
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_ITERATIONS):
        w = solvable.solve_mass(ka @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0 or not math.isfinite(norm_w):
            break
        lam_new = float(v @ w)
        v = w / norm_w
        if abs(lam_new - lam) <= POWER_TOL * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return abs(lam)


def _clamped_step(gamma: float, rho: float) -> float:
    if rho <= 0.0 or not math.isfinite(rho):
        return STEP_MAX
    h = STEP_SAFETY * RK4_REAL_AXIS_LIMIT / (gamma * rho)
    return min(max(h, STEP_MIN), STEP_MAX)


def prefactorize(model: NeuralModel) -> SolvableModel:
    """Factor the mass matrix once and attach the stable step size.

    DAE-classified models are refused: a singular mass matrix admits no
    state-space march.  Symmetric masses go through Cholesky (falling
    back to LU when indefinite); anything else is pivoted LU.
    """
    if model.system_class is SystemClass.DAE:
        raise DaeNotIntegrable(
            f"{model.kind.value} is a DAE here: its mass matrix is singular, "
            "so the flow mixes differential and algebraic constraints"
        )
    mass = model.mass
    chol = None
    lu = None
    scale = max(float(np.abs(mass).max()), 1.0)
    if float(np.abs(mass - mass.T).max()) <= linalg.SYMMETRY_RTOL * scale:
        try:
            chol = linalg.cholesky(mass)
        except linalg.NotPositiveDefinite:
            chol = None
    if chol is None:
        try:
            lu = linalg.lu_factor(mass)
        except linalg.SingularMatrix as exc:
            raise FactorizationFailed(
                f"mass matrix of {model.kind.value} could not be factored"
            ) from exc
    partial = SolvableModel(
        model=model,
        chol=chol,
        lu=lu,
        stable_step=STEP_MAX,
        drive_matrix=model.gamma * (model.gain @ model.problem.A),
        drive_vector=model.gamma * (model.gain @ model.problem.b),
    )
    rho = _spectral_radius(partial)
    return SolvableModel(
        model=model,
        chol=chol,
        lu=lu,
        stable_step=_clamped_step(model.gamma, rho),
        drive_matrix=partial.drive_matrix,
        drive_vector=partial.drive_vector,
    )


def auto_step_size(model: NeuralModel) -> float:
    """Stability-derived step: STEP_SAFETY * RK4 limit / (gamma * rho).

    rho is the dominant eigenvalue of M^{-1} K A (power iteration); the
    result is clamped to [STEP_MIN, STEP_MAX] seconds.
    """
    return prefactorize(model).stable_step


def _march(solvable: SolvableModel, x0: np.ndarray, h: float, n_steps: int, stride: int):
    kept = n_steps // stride + 1
    if n_steps % stride != 0:
        kept += 1
    out = np.empty((kept, x0.shape[0]))
    if solvable.chol is not None:
        rows, status, bad_step = kernels.rk4_march_chol(
            solvable.chol.lower,
            solvable.drive_matrix,
            solvable.drive_vector,
            x0,
            h,
            n_steps,
            stride,
            out,
            DIVERGENCE_LIMIT,
        )
    else:
        assert solvable.lu is not None
        rows, status, bad_step = kernels.rk4_march_lu(
            solvable.lu.lu,
            solvable.lu.piv,
            solvable.drive_matrix,
            solvable.drive_vector,
            x0,
            h,
            n_steps,
            stride,
            out,
            DIVERGENCE_LIMIT,
        )
    return out, rows, status, bad_step


def rk4_step(solvable: SolvableModel, x, h: float) -> np.ndarray:
    """One classical RK4 step; raises NonFiniteState on overflow."""
    x = linalg.as_vector(x)
    if x.shape[0] != solvable.model.problem.n:
        raise ValueError("dimension mismatch between state and model")
    if not h > 0.0:
        raise ValueError("step size must be > 0")
    out, _, status, _ = _march(solvable, x, h, 1, 1)
    if status != 0:
        raise NonFiniteState(
            f"state exceeded {DIVERGENCE_LIMIT:.0e} after one step of h={h:g}s; "
            f"the stable step for this model is {solvable.stable_step:g}s "
            "(see auto_step_size)",
            time=h,
            h=h,
        )
    return out[1]


def integrate(
    solvable: SolvableModel,
    x0,
    t_end: float,
    h: float | None = None,
    stride: int | None = None,
    lyapunov_fn=None,
    meta: dict | None = None,
) -> Trajectory:
    """Fixed-step march to (at least) t_end, keeping every stride-th sample.

    h defaults to stable_step / 10 and must not exceed stable_step; the
    default stride caps a trajectory at MAX_KEPT_SAMPLES samples.  The
    final state is always kept.  When lyapunov_fn is given it is
    evaluated at every kept sample.
    """
    x0 = linalg.as_vector(x0)
    if x0.shape[0] != solvable.model.problem.n:
        raise ValueError("dimension mismatch between initial state and model")
    if not t_end > 0.0:
        raise ValueError("t_end must be > 0")
    if h is None:
        h = solvable.stable_step / 10.0
    elif h > solvable.stable_step * (1.0 + 1e-12):
        raise ValueError(
            f"h={h:g}s exceeds the stable step {solvable.stable_step:g}s for this model"
        )
    if not h > 0.0:
        raise ValueError("step size must be > 0")
    n_steps = max(1, math.ceil(t_end / h - 1e-9))
    if stride is None:
        stride = max(1, math.ceil(n_steps / (MAX_KEPT_SAMPLES - 2)))
    elif stride < 1:
        raise ValueError("stride must be >= 1")

    out, rows, status, bad_step = _march(solvable, x0, h, n_steps, stride)
    if status != 0:
        raise NonFiniteState(
            f"state exceeded {DIVERGENCE_LIMIT:.0e} at t={bad_step * h:g}s "
            f"(step {bad_step} of {n_steps}, h={h:g}s); "
            f"the stable step for this model is {solvable.stable_step:g}s",
            time=bad_step * h,
            h=h,
        )
    states = out[:rows]
    kept_steps = list(range(0, n_steps + 1, stride))
    if kept_steps[-1] != n_steps:
        kept_steps.append(n_steps)
    times = h * np.asarray(kept_steps, dtype=np.float64)
    problem = solvable.model.problem
    residuals = np.linalg.norm(states @ problem.A.T - problem.b, axis=1)
    lyap = None
    if lyapunov_fn is not None:
        lyap = np.array([lyapunov_fn(s) for s in states])
    info = {
        "kind": solvable.model.kind.value,
        "gamma": solvable.model.gamma,
        "h": h,
        "stride": stride,
        "t_end": float(times[-1]),
    }
    if meta:
        info.update(meta)
    return Trajectory(times=times, states=states, residuals=residuals, lyapunov=lyap, meta=info)


def closed_form_error(model: NeuralModel, e0, t):
    """Exact solution of the error dynamics for IGNN and GNN.

    With A.T A = Q diag(lam) Q.T the error e = x - x_ref evolves mode by
    mode as exp(-gamma * r_i * t) with r_i = lam_i / (1 + lam_i) for
    IGNN and r_i = lam_i for GNN; zero modes stay constant, so the
    formula remains valid for singular A.  t may be a scalar or a 1-D
    array of times (rows of the result then correspond to times).
    """
    if model.kind not in (ModelKind.IGNN, ModelKind.GNN):
        raise UnsupportedKind(
            f"no closed-form error solution for {model.kind.value}; "
            "only the gradient-flow kinds (IGNN, GNN) admit one"
        )
    e0 = linalg.as_vector(e0)
    if e0.shape[0] != model.problem.n:
        raise ValueError("dimension mismatch between error vector and model")
    A = model.problem.A
    eig = linalg.sym_eigen(A.T @ A)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    rates = lam / (1.0 + lam) if model.kind is ModelKind.IGNN else lam
    coeff = eig.eigenvectors.T @ e0
    t_arr = np.asarray(t, dtype=np.float64)
    if t_arr.ndim == 0:
        return eig.eigenvectors @ (coeff * np.exp(-model.gamma * rates * float(t_arr)))
    if t_arr.ndim != 1:
        raise ValueError("t must be a scalar or a 1-D array")
    decay = np.exp(-model.gamma * np.outer(t_arr, rates))
    return (decay * coeff) @ eig.eigenvectors.T
