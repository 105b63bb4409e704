import dataclasses
import math

import numpy as np
import pytest

from neurodyn import linalg
from neurodyn.integrate import (
    DaeNotIntegrable,
    NonFiniteState,
    UnsupportedKind,
    auto_step_size,
    closed_form_error,
    integrate,
    prefactorize,
    rk4_step,
)
from neurodyn.models import ModelKind, Solvability, build_model, build_problem

A_SING = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, 1.0], [0.0, 1.0, 1.0]])
IDENTITY3 = build_problem(np.eye(3), [1.0, 1.0, 1.0])


def make_model(kind, A, b, gamma):
    return build_model(kind, build_problem(A, b), gamma)


class TestPrefactorize:
    def test_ignn_singular_ok(self):
        m = make_model(ModelKind.IGNN, A_SING, [1.0, 1.0, 1.0], 1000.0)
        s = prefactorize(m)
        assert s.chol is not None

    def test_gnn_identity_mass(self):
        m = make_model(ModelKind.GNN, A_SING, [1.0, 1.0, 1.0], 1000.0)
        s = prefactorize(m)
        assert np.array_equal(s.chol.lower, np.eye(3))

    def test_znn_singular_refused(self):
        m = make_model(ModelKind.ZNN, A_SING, [1.0, 1.0, 1.0], 1000.0)
        with pytest.raises(DaeNotIntegrable, match="singular"):
            prefactorize(m)

    def test_znn_nonsingular_uses_lu(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((4, 4))
        m = make_model(ModelKind.ZNN, A, rng.standard_normal(4), 100.0)
        s = prefactorize(m)
        assert s.chol is None and s.lu is not None

    def test_symmetric_indefinite_mass_falls_back_to_lu(self):
        A = np.diag([1.0, -2.0])  # symmetric, invertible, not PD
        m = make_model(ModelKind.ZNN, A, [1.0, 1.0], 10.0)
        s = prefactorize(m)
        assert s.chol is None and s.lu is not None


class TestAutoStepSize:
    def test_formula_ignn(self):
        # rho = lambda/(1+lambda) = 1/2 for the identity matrix
        m = make_model(ModelKind.IGNN, np.eye(3), [1.0, 1.0, 1.0], 1e4)
        assert auto_step_size(m) == pytest.approx(2.78e-4, rel=1e-9)

    def test_formula_gnn(self):
        m = make_model(ModelKind.GNN, np.eye(3), [1.0, 1.0, 1.0], 1e4)
        assert auto_step_size(m) == pytest.approx(1.39e-4, rel=1e-9)

    def test_gamma_doubling_halves_step(self):
        h1 = auto_step_size(make_model(ModelKind.IGNN, np.eye(3), [1.0, 1.0, 1.0], 1e4))
        h2 = auto_step_size(make_model(ModelKind.IGNN, np.eye(3), [1.0, 1.0, 1.0], 2e4))
        assert h2 == pytest.approx(h1 / 2.0, rel=1e-9)

    def test_upper_clamp(self):
        # the raw formula gives 2.78e-3 here; the step is capped at 1e-3
        m = make_model(ModelKind.IGNN, np.eye(3), [1.0, 1.0, 1.0], 1e3)
        assert auto_step_size(m) == 1e-3


class TestRk4Step:
    def test_fixed_point(self):
        p = build_problem(np.diag([1.0, 3.0]), [2.0, -3.0])
        s = prefactorize(build_model(ModelKind.IGNN, p, 1000.0))
        moved = rk4_step(s, p.x_star, s.stable_step / 10.0)
        assert np.abs(moved - p.x_star).max() <= 1e-14

    def test_scalar_matches_rk4_polynomial(self):
        # 1x1 system A=[1], b=[0], IGNN: xdot = -(gamma/2) x
        gamma = 1000.0
        s = prefactorize(make_model(ModelKind.IGNN, [[1.0]], [0.0], gamma))
        h = 4e-4
        z = gamma * h / 2.0
        expect = 1.0 - z + z**2 / 2.0 - z**3 / 6.0 + z**4 / 24.0
        got = rk4_step(s, [1.0], h)[0]
        assert got == pytest.approx(expect, rel=1e-14)

    def test_small_h_consistency(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((3, 3))
        p = build_problem(A, rng.standard_normal(3))
        s = prefactorize(build_model(ModelKind.IGNN, p, 10.0))
        x = rng.uniform(-1, 1, 3)
        h = 1e-7
        euler = x + h * s.solve_mass(s.drive_vector - s.drive_matrix @ x)
        assert np.linalg.norm(rk4_step(s, x, h) - euler) <= 1e-10 * max(1.0, np.linalg.norm(x))

    def test_overflow_raises(self):
        s = prefactorize(make_model(ModelKind.IGNN, np.diag([1.0, 2.0]), [1.0, -1.0], 1000.0))
        with pytest.raises(NonFiniteState, match="stable step"):
            rk4_step(s, [2.0, 2.0], 10.0)


class TestIntegrate:
    def test_identity_closed_form(self):
        # x(t) = (1 - exp(-500 t)) * ones for gamma=1000
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        traj = integrate(s, np.zeros(3), 0.01)
        expect = 1.0 - math.exp(-5.0)
        np.testing.assert_allclose(traj.states[-1], expect, rtol=1e-8)

    def test_fixed_point_trajectory(self):
        p = build_problem(np.diag([2.0, 5.0]), [1.0, 1.0])
        s = prefactorize(build_model(ModelKind.IGNN, p, 1000.0))
        traj = integrate(s, p.x_star, 0.01)
        assert np.abs(traj.states - p.x_star).max() <= 1e-12

    def test_trajectory_invariants(self):
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        traj = integrate(s, [2.0, -1.0, 0.5], 0.02, stride=7)
        assert traj.times[0] == 0.0
        assert np.all(np.diff(traj.times) > 0.0)
        assert len(traj.times) == len(traj.states) == len(traj.residuals)
        recomputed = np.linalg.norm(traj.states @ IDENTITY3.A.T - IDENTITY3.b, axis=1)
        assert np.abs(recomputed - traj.residuals).max() <= 1e-12

    def test_final_sample_always_kept(self):
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        h = s.stable_step / 10.0
        traj = integrate(s, np.ones(3), 103 * h, h=h, stride=10)
        assert traj.times[-1] == pytest.approx(103 * h)
        assert int(round(traj.times[-1] / h)) == 103

    def test_default_stride_caps_samples(self):
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        traj = integrate(s, np.ones(3), 1.2, h=1e-5)
        assert len(traj.times) <= 5000

    def test_h_above_stable_rejected(self):
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        with pytest.raises(ValueError, match="stable step"):
            integrate(s, np.ones(3), 0.01, h=s.stable_step * 2.0)

    def test_monotone_residuals_gradient_kinds(self):
        rng = np.random.default_rng(4)
        for kind in (ModelKind.IGNN, ModelKind.GNN):
            A = rng.standard_normal((4, 4))
            p = build_problem(A, rng.standard_normal(4))
            s = prefactorize(build_model(kind, p, 1000.0))
            traj = integrate(s, rng.uniform(-2, 2, 4), 0.03)
            assert np.all(np.diff(traj.residuals) <= 1e-10)

    def test_divergence_reports_time(self):
        s = prefactorize(build_model(ModelKind.IGNN, build_problem(np.diag([1.0, 2.0]), [1.0, -1.0]), 1000.0))
        lying = dataclasses.replace(s, stable_step=10.0)
        with pytest.raises(NonFiniteState) as info:
            integrate(lying, [2.0, 2.0], 1.0, h=0.01)
        assert info.value.time > 0.0
        assert info.value.h == 0.01

    def test_lyapunov_callback(self):
        s = prefactorize(build_model(ModelKind.IGNN, IDENTITY3, 1000.0))
        traj = integrate(s, np.zeros(3), 0.005, lyapunov_fn=lambda x: float(x @ x))
        assert traj.lyapunov is not None
        np.testing.assert_allclose(
            traj.lyapunov, np.einsum("ij,ij->i", traj.states, traj.states), atol=1e-15
        )


class TestEquilibriumPreservation:
    def test_million_steps(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((3, 3))
        p = build_problem(A, rng.standard_normal(3))
        s = prefactorize(build_model(ModelKind.IGNN, p, 1000.0))
        h = s.stable_step / 10.0
        traj = integrate(s, p.x_star, 1_000_000 * h, h=h, stride=1000)
        assert np.linalg.norm(traj.states - p.x_star, axis=1).max() <= 1e-10


class TestRk4Order:
    def test_halving_h_cuts_error_16x(self):
        p = build_problem(np.diag([1.0, 2.0]), [1.0, -1.0])
        m = build_model(ModelKind.IGNN, p, 1000.0)
        s = prefactorize(m)
        x0 = np.array([2.0, -2.0])
        e0 = x0 - p.x_star
        h0 = s.stable_step / 2.0
        t_end = 64 * h0
        errs = []
        for h in (h0, h0 / 2.0):
            traj = integrate(s, x0, t_end, h=h, stride=1)
            exact = p.x_star + closed_form_error(m, e0, t_end)
            errs.append(np.linalg.norm(traj.states[-1] - exact))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0


class TestClosedFormError:
    def test_time_zero(self):
        m = build_model(ModelKind.IGNN, IDENTITY3, 1000.0)
        e0 = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(closed_form_error(m, e0, 0.0), e0, atol=1e-15)

    def test_identity_one_time_constant(self):
        # identity matrix: modal rate gamma/2 = 500, so t = 0.002 is exp(-1)
        m = build_model(ModelKind.IGNN, IDENTITY3, 1000.0)
        e0 = np.array([1.0, 2.0, -0.5])
        got = closed_form_error(m, e0, 0.002)
        np.testing.assert_allclose(got, e0 * math.exp(-1.0), atol=1e-12)

    def test_null_mode_preserved(self):
        p = build_problem(A_SING, [1.0, 1.0, 1.0])
        m = build_model(ModelKind.IGNN, p, 1000.0)
        null = np.array([1.0, 1.0, -1.0]) / math.sqrt(3.0)
        e0 = 0.7 * null + np.array([0.1, -0.2, 0.3])
        for t in (0.0, 0.01, 1.0):
            comp = float(null @ closed_form_error(m, e0, t))
            assert comp == pytest.approx(float(null @ e0), abs=1e-12)

    def test_unsupported_kinds(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((3, 3))
        p = build_problem(A, rng.standard_normal(3))
        for kind in (ModelKind.ZNN, ModelKind.IZNN):
            m = build_model(kind, p, 10.0)
            with pytest.raises(UnsupportedKind):
                closed_form_error(m, np.ones(3), 0.1)

    def test_vectorized_times(self):
        m = build_model(ModelKind.GNN, IDENTITY3, 100.0)
        e0 = np.array([1.0, 0.0, -1.0])
        times = np.array([0.0, 0.001, 0.01])
        block = closed_form_error(m, e0, times)
        for row, t in zip(block, times):
            np.testing.assert_allclose(row, closed_form_error(m, e0, float(t)), atol=1e-15)


class TestOracleEquivalence:
    @pytest.mark.parametrize("trial", range(20))
    def test_rk4_matches_closed_form(self, trial):
        rng = np.random.default_rng(9000 + trial)
        n = int(rng.integers(2, 7))
        gamma = 10.0 if trial % 2 == 0 else 1000.0
        A = rng.standard_normal((n, n))
        if trial % 3 == 0:
            A[:, -1] = A[:, 0]  # rank-deficient case
        b = rng.standard_normal(n)
        problem = build_problem(A, b)
        kind = ModelKind.IGNN if trial % 2 == 0 else ModelKind.GNN
        model = build_model(kind, problem, gamma)
        s = prefactorize(model)
        x0 = rng.uniform(-2, 2, n)

        x_ls, _ = linalg.least_squares(A, b)
        null = linalg.null_space(A)
        x_ref = x_ls + (null @ (null.T @ x0) if null.shape[1] else 0.0)
        if problem.solvability is Solvability.UNIQUE:
            assert np.linalg.norm(x_ref - problem.x_star) <= 1e-8
        e0 = x0 - x_ref

        traj = integrate(s, x0, 10.0 / gamma, h=s.stable_step / 32.0)
        exact = x_ref + closed_form_error(model, e0, traj.times)
        err = np.linalg.norm(traj.states - exact, axis=1).max()
        assert err <= 1e-7 * np.linalg.norm(e0)
