"""Analogue recurrent neural dynamics for real-time linear-equation solving.

Simulates four continuous-time models of the family
M xdot = -gamma K (A x - b) -- explicit gradient flow (GNN), the
error-derivative designs (ZNN, IZNN) and the SPD-preconditioned
gradient flow (IGNN) -- together with convergence-rate analysis,
Lyapunov verification and scripted experiments.
"""

from .analysis import (
    InsufficientData,
    NotSettled,
    NotUnique,
    RateReport,
    asymptotic_residual,
    convergence_time,
    decay_bound_margin,
    fit_decay_rate,
    late_window,
    lyapunov_degenerate,
    lyapunov_evaluator,
    lyapunov_unique,
    series_non_increasing,
    theoretical_rates,
)
from .backend import BACKEND
from .experiments import (
    ExperimentReport,
    RunSummary,
    compare_models,
    gen_prescribed,
    run_degenerate,
    run_residual_decay,
    showcase_unique,
    singular_example,
)
from .integrate import (
    DaeNotIntegrable,
    FactorizationFailed,
    NonFiniteState,
    SolvableModel,
    Trajectory,
    UnsupportedKind,
    auto_step_size,
    closed_form_error,
    integrate,
    prefactorize,
    rk4_step,
)
from .linalg import (
    CholeskyFactor,
    LUFactor,
    NotPositiveDefinite,
    SingularMatrix,
    SymEigen,
    cholesky,
    chol_solve,
    least_squares,
    lu_factor,
    lu_solve,
    mat_vec,
    null_space,
    rank,
    solve,
    sym_eigen,
)
from .models import (
    LinearProblem,
    ModelKind,
    NeuralModel,
    NonPositiveGamma,
    Solvability,
    SystemClass,
    build_model,
    build_problem,
    residual,
    rhs,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CholeskyFactor",
    "DaeNotIntegrable",
    "ExperimentReport",
    "FactorizationFailed",
    "InsufficientData",
    "LUFactor",
    "LinearProblem",
    "ModelKind",
    "NeuralModel",
    "NonFiniteState",
    "NonPositiveGamma",
    "NotPositiveDefinite",
    "NotSettled",
    "NotUnique",
    "RateReport",
    "RunSummary",
    "SingularMatrix",
    "SolvableModel",
    "SymEigen",
    "SystemClass",
    "Solvability",
    "Trajectory",
    "UnsupportedKind",
    "asymptotic_residual",
    "auto_step_size",
    "build_model",
    "build_problem",
    "cholesky",
    "chol_solve",
    "closed_form_error",
    "compare_models",
    "convergence_time",
    "decay_bound_margin",
    "fit_decay_rate",
    "gen_prescribed",
    "integrate",
    "late_window",
    "least_squares",
    "lu_factor",
    "lu_solve",
    "lyapunov_degenerate",
    "lyapunov_evaluator",
    "lyapunov_unique",
    "mat_vec",
    "null_space",
    "prefactorize",
    "rank",
    "residual",
    "rhs",
    "rk4_step",
    "run_degenerate",
    "run_residual_decay",
    "series_non_increasing",
    "showcase_unique",
    "singular_example",
    "solve",
    "sym_eigen",
    "theoretical_rates",
]
