"""Problem generators and scripted convergence experiments.

Three scenarios cover the interesting regimes of the SPD-preconditioned
gradient flow (IGNN):

* showcase_unique / run_residual_decay: a nonsingular system whose
  smallest Gram eigenvalue is prescribed (default 0.2345), integrated
  from several random initial states in [-2, 2]^n;
* run_degenerate: the canonical singular 3x3 system, in its
  inconsistent (no solution) and underdetermined (multiple solutions)
  variants;
* compare_models: all four dynamics on one problem, with DAE kinds
  reported as not integrable.

Runs are deterministic: one seed fixes the problem, the initial states
and therefore every byte of the outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis, linalg
from .integrate import DaeNotIntegrable, Trajectory, integrate, prefactorize
from .models import (
    LinearProblem,
    ModelKind,
    NeuralModel,
    Solvability,
    build_model,
    build_problem,
)

DEFAULT_GAMMA = 1000.0
DEFAULT_INITS = 6
INIT_RANGE = 2.0
RESIDUAL_THRESHOLD = math.exp(-7.0)

# Singular values giving lambda_min(A.T A) = 0.2345 with well-separated
# modes, so the slow mode dominates the late window of the residual fit.
DEFAULT_SIGMA = (math.sqrt(0.2345), 1.0, 2.0)

# The canonical rank-2 showcase system: row3 = row1 + row2.
SINGULAR_A = ((1.0, -1.0, 0.0), (-1.0, 2.0, 1.0), (0.0, 1.0, 1.0))
SINGULAR_B_NO_SOLUTION = (1.0, 1.0, 1.0)
SINGULAR_B_MULTI_SOLUTION = (0.0, 1.0, 1.0)

FIG_DECAY_T_END = 0.06  # seconds at gamma = 1000; scaled by 1000/gamma
FIG_DEGENERATE_T_END = 0.1

MONOTONE_SLACK = 1e-10
RATE_MATCH_RTOL = 0.05
DEGENERATE_RESIDUAL_ATOL = 1e-3
CONSISTENT_RESIDUAL_ATOL = 1e-6


def _orthogonalize(M: np.ndarray) -> np.ndarray:
    """Orthonormal factor of M with a deterministic sign convention."""
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    return Q * signs


def gen_prescribed(n: int, sigma, seed: int) -> LinearProblem:
    """Random problem with prescribed singular values and a known solution.

    A = U diag(sigma) V.T with U, V orthogonalized seeded Gaussian
    matrices, and b = A x_target for a seeded x_target in [-2, 2]^n, so
    the resulting smallest eigenvalue of A.T A is min(sigma)^2.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (n,):
        raise ValueError(f"sigma must have {n} entries, got shape {sigma.shape}")
    if not np.all(sigma > 0.0):
        raise ValueError("all singular values must be > 0")
    rng = np.random.default_rng(seed)
    U = _orthogonalize(rng.standard_normal((n, n)))
    V = _orthogonalize(rng.standard_normal((n, n)))
    A = (U * sigma) @ V.T
    x_target = rng.uniform(-INIT_RANGE, INIT_RANGE, n)
    return build_problem(A, A @ x_target)


def showcase_unique(gamma_alpha: float = 0.2345, seed: int = 0) -> LinearProblem:
    """3x3 nonsingular problem with lambda_min(A.T A) = gamma_alpha."""
    sigma = (math.sqrt(gamma_alpha),) + DEFAULT_SIGMA[1:]
    return gen_prescribed(3, sigma, seed)


def singular_example(case: Solvability) -> LinearProblem:
    """The canonical singular system in its no-solution or multi-solution form."""
    if case is Solvability.NO_SOLUTION:
        b = SINGULAR_B_NO_SOLUTION
    elif case is Solvability.MULTI_SOLUTION:
        b = SINGULAR_B_MULTI_SOLUTION
    else:
        raise ValueError("case must be NO_SOLUTION or MULTI_SOLUTION")
    problem = build_problem(SINGULAR_A, b)
    if problem.solvability is not case:
        raise AssertionError(f"expected {case}, classified {problem.solvability}")
    return problem


def random_initial_states(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count uniform initial states in [-2, 2]^n, one per row."""
    return rng.uniform(-INIT_RANGE, INIT_RANGE, (count, n))


@dataclass(frozen=True)
class RunSummary:
    """Per-trajectory digest kept alongside the full trajectory."""

    label: str
    x0: np.ndarray
    system_class: str
    final_state: np.ndarray | None = None
    final_residual: float | None = None
    fitted_rate: float | None = None
    convergence_time: float | None = None
    asymptotic_residual: float | None = None
    residual_monotone: bool | None = None
    lyapunov_monotone: bool | None = None
    converged: bool = False
    note: str = ""


@dataclass(frozen=True)
class ExperimentReport:
    scenario: str
    seed: int
    gamma: float
    h: float
    stride: int
    t_end: float
    problem: LinearProblem
    rates: analysis.RateReport
    runs: list[RunSummary]
    trajectories: list[Trajectory]
    flags: dict[str, bool]
    notes: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def _integrate_batch(model: NeuralModel, inits: np.ndarray, t_end: float, h: float | None, seed: int):
    solvable = prefactorize(model)
    if h is None:
        h = solvable.stable_step / 10.0
    lyap = analysis.lyapunov_evaluator(model.problem)
    trajectories = [
        integrate(solvable, x0, t_end, h=h, lyapunov_fn=lyap, meta={"seed": seed, "run": i})
        for i, x0 in enumerate(inits)
    ]
    return trajectories, h, trajectories[0].meta["stride"]


def run_residual_decay(
    gamma: float = DEFAULT_GAMMA,
    n_inits: int = DEFAULT_INITS,
    seed: int = 0,
    t_end: float | None = None,
    h: float | None = None,
    threshold: float = RESIDUAL_THRESHOLD,
) -> ExperimentReport:
    """IGNN residual decay on the prescribed-spectrum unique problem.

    Checks, per initial state: monotone residual, threshold reached, and
    fitted late-window rate matching the modal rate within 5%.
    """
    if n_inits < 1:
        raise ValueError("n_inits must be >= 1")
    problem = showcase_unique(seed=seed)
    rates = analysis.theoretical_rates(problem, gamma)
    if t_end is None:
        t_end = FIG_DECAY_T_END * (DEFAULT_GAMMA / gamma)
    model = build_model(ModelKind.IGNN, problem, gamma)
    rng = np.random.default_rng(seed)
    inits = random_initial_states(problem.n, n_inits, rng)
    trajectories, h, stride = _integrate_batch(model, inits, t_end, h, seed)

    runs = []
    for i, traj in enumerate(trajectories):
        fitted = analysis.fit_decay_rate(traj, analysis.late_window(traj))
        ct = analysis.convergence_time(traj, threshold)
        runs.append(
            RunSummary(
                label=f"run{i}",
                x0=inits[i],
                system_class=model.system_class.value,
                final_state=traj.states[-1],
                final_residual=float(traj.residuals[-1]),
                fitted_rate=fitted,
                convergence_time=ct,
                residual_monotone=analysis.series_non_increasing(traj.residuals, MONOTONE_SLACK),
                lyapunov_monotone=analysis.series_non_increasing(traj.lyapunov, MONOTONE_SLACK),
                converged=ct is not None,
            )
        )
    flags = {
        "all_converged": all(r.converged for r in runs),
        "residuals_monotone": all(r.residual_monotone for r in runs),
        "rates_match_modal": all(
            r.fitted_rate is not None
            and abs(r.fitted_rate - rates.modal_rate) <= RATE_MATCH_RTOL * rates.modal_rate
            for r in runs
        ),
    }
    notes = {
        "threshold": threshold,
        "guaranteed_rate": rates.guaranteed_rate,
        "modal_rate": rates.modal_rate,
        # time-to-threshold predictions from each rate, for the slowest run
        "predicted_ms_guaranteed": _predicted_ms(trajectories, threshold, rates.guaranteed_rate),
        "predicted_ms_modal": _predicted_ms(trajectories, threshold, rates.modal_rate),
    }
    return ExperimentReport(
        scenario="residual-decay",
        seed=seed,
        gamma=gamma,
        h=h,
        stride=stride,
        t_end=t_end,
        problem=problem,
        rates=rates,
        runs=runs,
        trajectories=trajectories,
        flags=flags,
        notes=notes,
    )


def _predicted_ms(trajectories, threshold: float, rate: float) -> float:
    """Single-mode prediction ln(r0/threshold)/rate, worst initial state."""
    if not rate > 0.0:
        return float("inf")
    r0 = max(float(t.residuals[0]) for t in trajectories)
    return 1000.0 * math.log(r0 / threshold) / rate


def run_degenerate(
    case: Solvability,
    gamma: float = DEFAULT_GAMMA,
    n_inits: int = DEFAULT_INITS,
    seed: int = 0,
    t_end: float | None = None,
    h: float | None = None,
) -> ExperimentReport:
    """IGNN on the singular showcase system; checks the settled residual.

    No-solution case: every run must settle at the least-squares minimum
    residual.  Multi-solution case: every run must settle at a residual
    below 1e-6 (an exact solution is reached).  Both: the degenerate
    Lyapunov values must never increase.
    """
    problem = singular_example(case)
    rates = analysis.theoretical_rates(problem, gamma)
    if t_end is None:
        t_end = FIG_DEGENERATE_T_END * (DEFAULT_GAMMA / gamma)
    model = build_model(ModelKind.IGNN, problem, gamma)
    rng = np.random.default_rng(seed)
    inits = random_initial_states(problem.n, n_inits, rng)
    trajectories, h, stride = _integrate_batch(model, inits, t_end, h, seed)
    _, min_residual = linalg.least_squares(problem.A, problem.b)

    runs = []
    for i, traj in enumerate(trajectories):
        settled = None
        note = ""
        try:
            settled = analysis.asymptotic_residual(traj)
        except analysis.NotSettled as exc:
            note = str(exc)
        runs.append(
            RunSummary(
                label=f"run{i}",
                x0=inits[i],
                system_class=model.system_class.value,
                final_state=traj.states[-1],
                final_residual=float(traj.residuals[-1]),
                asymptotic_residual=settled,
                residual_monotone=analysis.series_non_increasing(traj.residuals, MONOTONE_SLACK),
                lyapunov_monotone=analysis.series_non_increasing(traj.lyapunov, MONOTONE_SLACK),
                converged=settled is not None,
                note=note,
            )
        )
    flags = {"all_settled": all(r.converged for r in runs)}
    if case is Solvability.NO_SOLUTION:
        flags["asymptotic_residual_ok"] = all(
            r.asymptotic_residual is not None
            and abs(r.asymptotic_residual - min_residual) <= DEGENERATE_RESIDUAL_ATOL
            for r in runs
        )
    else:
        flags["residual_vanishes"] = all(
            r.asymptotic_residual is not None
            and r.asymptotic_residual <= CONSISTENT_RESIDUAL_ATOL
            for r in runs
        )
        flags["final_state_solves_system"] = all(
            r.final_residual is not None and r.final_residual <= CONSISTENT_RESIDUAL_ATOL
            for r in runs
        )
    flags["lyapunov_monotone"] = all(r.lyapunov_monotone for r in runs)
    notes = {"least_squares_residual": min_residual}
    return ExperimentReport(
        scenario=f"degenerate-{case.value}",
        seed=seed,
        gamma=gamma,
        h=h,
        stride=stride,
        t_end=t_end,
        problem=problem,
        rates=rates,
        runs=runs,
        trajectories=trajectories,
        flags=flags,
        notes=notes,
    )


def compare_models(
    problem: LinearProblem,
    gamma: float = DEFAULT_GAMMA,
    x0=None,
    t_end: float | None = None,
    h: float | None = None,
    threshold: float = RESIDUAL_THRESHOLD,
    seed: int = 0,
) -> ExperimentReport:
    """All four dynamics on one problem from one initial state.

    DAE-classified kinds are recorded as not integrable rather than
    failing the report.  Integrable kinds report fitted rate (when the
    late window has usable samples), time to threshold and final state.
    """
    rates = analysis.theoretical_rates(problem, gamma)
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = random_initial_states(problem.n, 1, rng)[0]
    else:
        x0 = linalg.as_vector(x0)
    if t_end is None:
        if problem.solvability is Solvability.UNIQUE:
            t_end = 18.0 / rates.modal_rate
        else:
            t_end = FIG_DEGENERATE_T_END * (DEFAULT_GAMMA / gamma)

    lyap = analysis.lyapunov_evaluator(problem)
    runs = []
    trajectories = []
    used_h = h
    used_stride = 1
    for kind in ModelKind:
        model = build_model(kind, problem, gamma)
        try:
            solvable = prefactorize(model)
        except DaeNotIntegrable as exc:
            runs.append(
                RunSummary(
                    label=kind.value,
                    x0=x0,
                    system_class=model.system_class.value,
                    note=str(exc),
                )
            )
            continue
        kind_h = h if h is not None else solvable.stable_step / 10.0
        traj = integrate(
            solvable, x0, t_end, h=kind_h, lyapunov_fn=lyap, meta={"seed": seed, "run": kind.value}
        )
        trajectories.append(traj)
        if used_h is None:
            used_h = kind_h
        used_stride = traj.meta["stride"]
        fitted = None
        try:
            fitted = analysis.fit_decay_rate(traj, analysis.late_window(traj))
        except analysis.InsufficientData:
            pass
        ct = analysis.convergence_time(traj, threshold)
        settled = None
        if problem.solvability is Solvability.UNIQUE:
            converged = ct is not None and bool(
                np.linalg.norm(traj.states[-1] - problem.x_star) <= 1e-6
            )
        else:
            # no point solution to reach; settling at a plateau is success
            try:
                settled = analysis.asymptotic_residual(traj)
                converged = True
            except analysis.NotSettled:
                converged = False
        runs.append(
            RunSummary(
                label=kind.value,
                x0=x0,
                system_class=model.system_class.value,
                final_state=traj.states[-1],
                final_residual=float(traj.residuals[-1]),
                fitted_rate=fitted,
                convergence_time=ct,
                asymptotic_residual=settled,
                residual_monotone=analysis.series_non_increasing(traj.residuals, MONOTONE_SLACK),
                lyapunov_monotone=analysis.series_non_increasing(traj.lyapunov, MONOTONE_SLACK),
                converged=converged,
            )
        )
    integrable = [r for r in runs if r.system_class == "ODE"]
    flags = {"all_integrable_converged": all(r.converged for r in integrable)}
    return ExperimentReport(
        scenario="compare-models",
        seed=seed,
        gamma=gamma,
        h=used_h if used_h is not None else 0.0,
        stride=used_stride,
        t_end=t_end,
        problem=problem,
        rates=rates,
        runs=runs,
        trajectories=trajectories,
        flags=flags,
        notes={"threshold": threshold},
    )
