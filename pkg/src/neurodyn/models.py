"""The four analogue neural dynamics as mass-matrix systems.

Each model is the linear time-invariant flow

    M @ xdot = -gamma * K @ (A @ x - b)

with (M, K) chosen per kind:

    GNN   M = I          K = A.T          (explicit gradient flow)
    ZNN   M = A          K = I            (error-derivative design)
    IZNN  M = A          K = A A.T + I    (gain-boosted variant)
    IGNN  M = A.T A + I  K = A.T          (SPD-preconditioned gradient flow)

A singular mass matrix turns the flow into differential-algebraic
equations; models are still constructible then (for classification and
reporting) but the integrator refuses them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg


class ModelKind(enum.Enum):
    GNN = "GNN"
    ZNN = "ZNN"
    IZNN = "IZNN"
    IGNN = "IGNN"


class Solvability(enum.Enum):
    UNIQUE = "Unique"
    NO_SOLUTION = "NoSolution"
    MULTI_SOLUTION = "MultiSolution"


class SystemClass(enum.Enum):
    ODE = "ODE"
    DAE = "DAE"


class NonPositiveGamma(ValueError):
    """The convergence-speed parameter must be a positive real."""


@dataclass(frozen=True)
class LinearProblem:
    """A square system A x = b with its solvability classification.

    x_star is the exact solution when the classification is UNIQUE,
    None otherwise.
    """

    A: np.ndarray
    b: np.ndarray
    solvability: Solvability
    x_star: np.ndarray | None

    @property
    def n(self) -> int:
        return self.A.shape[0]


def build_problem(A, b) -> LinearProblem:
    """Classify A x = b as Unique / NoSolution / MultiSolution.

    Rank tests decide: full rank gives a unique solution (computed by
    pivoted elimination); otherwise the augmented matrix [A | b] tells
    inconsistent systems apart from underdetermined ones.
    """
    A = linalg.as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {A.shape}")
    b = linalg.as_vector(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.shape[0]} entries")

    n = A.shape[0]
    r = linalg.rank(A)
    if r == n:
        return LinearProblem(A=A, b=b, solvability=Solvability.UNIQUE, x_star=linalg.solve(A, b))
    augmented = np.concatenate([A, b[:, None]], axis=1)
    if linalg.rank(augmented) > r:
        solvability = Solvability.NO_SOLUTION
    else:
        solvability = Solvability.MULTI_SOLUTION
    return LinearProblem(A=A, b=b, solvability=solvability, x_star=None)


@dataclass(frozen=True)
class NeuralModel:
    """One of the four dynamics, with materialized mass and gain matrices."""

    kind: ModelKind
    gamma: float
    mass: np.ndarray
    gain: np.ndarray
    problem: LinearProblem
    system_class: SystemClass


def build_model(kind: ModelKind, problem: LinearProblem, gamma: float) -> NeuralModel:
    """Materialize mass/gain matrices for a kind and classify ODE vs DAE."""
    gamma = float(gamma)
    if not gamma > 0.0 or not np.isfinite(gamma):
        raise NonPositiveGamma(f"gamma must be a positive finite real, got {gamma}")
    A = problem.A
    n = problem.n
    eye = np.eye(n)
    if kind is ModelKind.GNN:
        mass, gain = eye, A.T.copy()
    elif kind is ModelKind.ZNN:
        mass, gain = A.copy(), eye
    elif kind is ModelKind.IZNN:
        mass, gain = A.copy(), A @ A.T + eye
    elif kind is ModelKind.IGNN:
        mass, gain = A.T @ A + eye, A.T.copy()
    else:
        raise TypeError(f"unknown model kind: {kind!r}")
    system_class = SystemClass.ODE if linalg.rank(mass) == n else SystemClass.DAE
    return NeuralModel(
        kind=kind,
        gamma=gamma,
        mass=mass,
        gain=gain,
        problem=problem,
        system_class=system_class,
    )


def rhs(model: NeuralModel, x) -> np.ndarray:
    """Right-hand side -gamma * K @ (A x - b); vanishes at an exact solution."""
    x = linalg.as_vector(x)
    if x.shape[0] != model.problem.n:
        raise ValueError(f"dimension mismatch: state has {x.shape[0]} entries, need {model.problem.n}")
    return -model.gamma * (model.gain @ (model.problem.A @ x - model.problem.b))


def residual(problem: LinearProblem, x) -> float:
    """Euclidean norm of A x - b."""
    x = linalg.as_vector(x)
    if x.shape[0] != problem.n:
        raise ValueError(f"dimension mismatch: state has {x.shape[0]} entries, need {problem.n}")
    return float(np.linalg.norm(problem.A @ x - problem.b))
