"""Stability and convergence analysis of simulated trajectories.

Two Lyapunov candidates are evaluated numerically: a solution-error form
for uniquely solvable systems and a normal-equation form that stays
meaningful for singular coefficient matrices.  Rate utilities compare
three numbers for the SPD-preconditioned gradient flow (IGNN):

* guaranteed_rate -- gamma * alpha for 0 < alpha < 1, gamma for
  alpha >= 1, the conservative bound from the stability analysis;
* modal_rate -- gamma * alpha / (1 + alpha), the slowest eigenmode of
  the error dynamics (A.T A + I) edot = -gamma A.T A e, which is what a
  simulated residual actually decays at;
* fitted_rate -- a log-linear regression on measured residuals.

alpha and beta are the smallest eigenvalues of A.T A and A.T A + I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .integrate import Trajectory
from .models import LinearProblem, Solvability

RESIDUAL_FLOOR = 1e-13
FIT_MIN_SAMPLES = 10
LATE_WINDOW = (0.6, 0.95)
SETTLE_FRACTION = 0.1
SETTLE_RTOL = 1e-6


class NotUnique(ValueError):
    """The operation needs a uniquely solvable problem (an exact x_star)."""


class InsufficientData(ValueError):
    """Too few usable samples in the requested window."""


class NotSettled(RuntimeError):
    """The trajectory tail is still moving; no asymptotic value exists."""


@dataclass(frozen=True)
class RateReport:
    """Convergence-rate summary for one problem at a given gamma."""

    alpha: float
    beta: float
    guaranteed_rate: float
    modal_rate: float
    gamma: float
    fitted_rate: float | None = None


def lyapunov_unique(problem: LinearProblem, x) -> float:
    """||(A.T A + I)(x - x_star)||^2 / 2; zero exactly at the solution."""
    if problem.solvability is not Solvability.UNIQUE:
        raise NotUnique("solution-error Lyapunov candidate needs a unique solution")
    x = linalg.as_vector(x)
    A = problem.A
    e = x - problem.x_star
    v = A.T @ (A @ e) + e
    return 0.5 * float(v @ v)


def lyapunov_degenerate(problem: LinearProblem, x) -> float:
    """||A.T A x - A.T b||^2 / 2 + ||A x - b||^2 / 2; valid for any A."""
    x = linalg.as_vector(x)
    A = problem.A
    r = A @ x - problem.b
    g = A.T @ r
    return 0.5 * float(g @ g) + 0.5 * float(r @ r)


def lyapunov_evaluator(problem: LinearProblem):
    """The candidate matching the problem's solvability, as x -> value."""
    if problem.solvability is Solvability.UNIQUE:
        return lambda x: lyapunov_unique(problem, x)
    return lambda x: lyapunov_degenerate(problem, x)


def theoretical_rates(problem: LinearProblem, gamma: float) -> RateReport:
    """alpha, beta and the guaranteed/modal rates for a problem."""
    if not gamma > 0.0:
        raise ValueError("gamma must be > 0")
    A = problem.A
    lam = linalg.sym_eigen(A.T @ A).eigenvalues
    # below the numerical-rank threshold the smallest eigenvalue is noise
    alpha = float(lam[0])
    if alpha <= linalg.EPS * problem.n * float(lam[-1]) or alpha < 0.0:
        alpha = 0.0
    beta = float(linalg.sym_eigen(A.T @ A + np.eye(problem.n)).eigenvalues[0])
    guaranteed = gamma * alpha if alpha < 1.0 else gamma
    return RateReport(
        alpha=alpha,
        beta=beta,
        guaranteed_rate=guaranteed,
        modal_rate=gamma * alpha / (1.0 + alpha),
        gamma=gamma,
    )


def late_window(traj: Trajectory) -> tuple[float, float]:
    """Default fit window [0.6, 0.95] * t_end, past the fast transients."""
    return LATE_WINDOW[0] * traj.t_end, LATE_WINDOW[1] * traj.t_end


def fit_decay_rate(traj: Trajectory, window: tuple[float, float]) -> float:
    """Least-squares slope of -ln(residual) over t in [window].

    Samples at or below RESIDUAL_FLOOR are discarded (they carry only
    rounding noise); fewer than FIT_MIN_SAMPLES usable samples raise
    InsufficientData.
    """
    lo, hi = window
    mask = (traj.times >= lo) & (traj.times <= hi) & (traj.residuals > RESIDUAL_FLOOR)
    if int(mask.sum()) < FIT_MIN_SAMPLES:
        raise InsufficientData(
            f"only {int(mask.sum())} usable samples in window [{lo:g}, {hi:g}]s"
        )
    t = traj.times[mask]
    y = -np.log(traj.residuals[mask])
    slope = np.polyfit(t, y, 1)[0]
    return float(slope)


def convergence_time(traj: Trajectory, threshold: float) -> float | None:
    """First time the residual reaches the threshold, or None.

    Interpolates linearly in ln(residual) between the bracketing
    samples, which is exact for single-mode exponential decay.
    """
    if not threshold > 0.0:
        raise ValueError("threshold must be > 0")
    r = traj.residuals
    if r[0] <= threshold:
        return 0.0
    below = np.nonzero(r <= threshold)[0]
    if below.size == 0:
        return None
    i = int(below[0])
    t0, t1 = traj.times[i - 1], traj.times[i]
    ln_prev = np.log(r[i - 1])
    ln_next = np.log(max(r[i], 1e-300))
    frac = (ln_prev - np.log(threshold)) / (ln_prev - ln_next)
    return float(t0 + frac * (t1 - t0))


def asymptotic_residual(traj: Trajectory) -> float:
    """Mean residual over the final tenth of the samples, once settled.

    The tail counts as settled when its spread is below SETTLE_RTOL
    relative to its mean, or when the tail itself has collapsed to
    rounding noise relative to the initial residual (a consistent
    system's plateau is pure float noise, where a relative spread test
    is meaningless).  Raises NotSettled otherwise.
    """
    count = max(2, int(np.ceil(SETTLE_FRACTION * traj.residuals.shape[0])))
    tail = traj.residuals[-count:]
    mean = float(tail.mean())
    spread = float(tail.max() - tail.min())
    noise_floor = 1e-9 * max(1.0, float(traj.residuals[0]))
    if float(tail.max()) > noise_floor and spread > SETTLE_RTOL * max(mean, 1e-300):
        raise NotSettled(
            f"final {count} samples still vary by {spread:.3e} (mean {mean:.3e})"
        )
    return mean


def series_non_increasing(values, slack: float = 1e-10) -> bool:
    """True when consecutive differences never exceed the absolute slack."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        return True
    return bool(np.all(np.diff(v) <= slack))


def decay_bound_margin(traj: Trajectory, problem: LinearProblem, gamma: float) -> float:
    """Worst relative violation of phidot <= -gamma*alpha*beta*||e||^2.

    phidot is estimated by centered differences of the sampled
    solution-error Lyapunov values (endpoints have no centered stencil
    and are excluded; one-sided differences systematically under-report
    the decay and would flag spurious violations).  Samples whose error
    has collapsed below 1e-12 of the initial error are skipped as
    rounding noise.  A return value <= 0 means the bound held strictly;
    positive values measure the violation relative to the bound.
    """
    if problem.solvability is not Solvability.UNIQUE:
        raise NotUnique("the decay bound is stated for uniquely solvable systems")
    rates = theoretical_rates(problem, gamma)
    err = traj.states - problem.x_star
    err_sq = np.einsum("ij,ij->i", err, err)
    phi = np.array([lyapunov_unique(problem, s) for s in traj.states])
    if phi.shape[0] < 3:
        raise InsufficientData("need at least 3 samples for a centered difference")
    fd = (phi[2:] - phi[:-2]) / (traj.times[2:] - traj.times[:-2])
    bound = -gamma * rates.alpha * rates.beta * err_sq[1:-1]
    keep = err_sq[1:-1] > (1e-12**2) * max(err_sq[0], 1e-300)
    if not keep.any():
        return -np.inf
    margin = (fd[keep] - bound[keep]) / np.abs(bound[keep])
    return float(margin.max())
