import math

import numpy as np
import pytest

from neurodyn import analysis, linalg
from neurodyn.experiments import (
    DEFAULT_SIGMA,
    compare_models,
    gen_prescribed,
    run_degenerate,
    run_residual_decay,
    showcase_unique,
    singular_example,
)
from neurodyn.integrate import integrate, prefactorize
from neurodyn.models import ModelKind, Solvability, build_model

THRESHOLD = math.exp(-7.0)


class TestGenPrescribed:
    def test_prescribed_minimum_eigenvalue(self):
        p = gen_prescribed(3, DEFAULT_SIGMA, seed=0)
        lam = linalg.sym_eigen(p.A.T @ p.A).eigenvalues
        assert lam[0] == pytest.approx(0.2345, abs=1e-9)
        assert p.solvability is Solvability.UNIQUE

    def test_orthogonal_when_sigma_ones(self):
        p = gen_prescribed(4, np.ones(4), seed=1)
        np.testing.assert_allclose(p.A.T @ p.A, np.eye(4), atol=1e-12)

    def test_deterministic(self):
        p1 = gen_prescribed(3, DEFAULT_SIGMA, seed=42)
        p2 = gen_prescribed(3, DEFAULT_SIGMA, seed=42)
        assert np.array_equal(p1.A, p2.A)
        assert np.array_equal(p1.b, p2.b)

    def test_seed_changes_problem(self):
        p1 = gen_prescribed(3, DEFAULT_SIGMA, seed=1)
        p2 = gen_prescribed(3, DEFAULT_SIGMA, seed=2)
        assert not np.array_equal(p1.A, p2.A)

    def test_consistent_rhs(self):
        p = gen_prescribed(5, (0.5, 0.8, 1.0, 1.5, 2.0), seed=3)
        assert np.linalg.norm(p.A @ p.x_star - p.b) <= 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_prescribed(3, (1.0, 2.0), seed=0)
        with pytest.raises(ValueError):
            gen_prescribed(2, (0.0, 1.0), seed=0)


class TestSingularExample:
    def test_no_solution(self):
        p = singular_example(Solvability.NO_SOLUTION)
        assert p.solvability is Solvability.NO_SOLUTION

    def test_multi_solution(self):
        p = singular_example(Solvability.MULTI_SOLUTION)
        assert p.solvability is Solvability.MULTI_SOLUTION

    def test_alpha_zero(self):
        for case in (Solvability.NO_SOLUTION, Solvability.MULTI_SOLUTION):
            p = singular_example(case)
            assert analysis.theoretical_rates(p, 1000.0).alpha == 0.0

    def test_unique_rejected(self):
        with pytest.raises(ValueError):
            singular_example(Solvability.UNIQUE)


@pytest.fixture(scope="module")
def report():
    return run_residual_decay(gamma=1000.0, n_inits=6, seed=0)


@pytest.fixture(scope="module")
def nosol():
    return run_degenerate(Solvability.NO_SOLUTION, seed=0)


@pytest.fixture(scope="module")
def multi():
    return run_degenerate(Solvability.MULTI_SOLUTION, seed=0)


class TestResidualDecay:
    def test_all_flags_pass(self, report):
        assert report.passed, report.flags

    def test_residuals_reach_threshold(self, report):
        for traj in report.trajectories:
            assert traj.residuals[-1] <= THRESHOLD

    def test_fitted_rates_near_modal(self, report):
        for run in report.runs:
            assert run.fitted_rate == pytest.approx(report.rates.modal_rate, rel=0.05)

    def test_guaranteed_rate_logged(self, report):
        assert report.notes["guaranteed_rate"] == pytest.approx(234.5, abs=1e-6)
        assert report.rates.modal_rate == pytest.approx(189.9554475, abs=1e-4)

    def test_single_mode_prediction_overestimates(self, report):
        # generic initial states spread energy over fast modes, so the
        # single-mode time prediction is an upper bound on the measured time
        for run, traj in zip(report.runs, report.trajectories):
            predicted = math.log(traj.residuals[0] / THRESHOLD) / run.fitted_rate
            assert run.convergence_time <= predicted * (1.0 + 1e-9)

    def test_single_mode_prediction_tight_when_aligned(self):
        # start on the slow eigenvector: the prediction becomes exact
        p = showcase_unique(seed=0)
        eig = linalg.sym_eigen(p.A.T @ p.A)
        model = build_model(ModelKind.IGNN, p, 1000.0)
        s = prefactorize(model)
        x0 = p.x_star + 1.5 * eig.eigenvectors[:, 0]
        traj = integrate(s, x0, 0.06)
        fitted = analysis.fit_decay_rate(traj, analysis.late_window(traj))
        measured = analysis.convergence_time(traj, THRESHOLD)
        predicted = math.log(traj.residuals[0] / THRESHOLD) / fitted
        assert measured == pytest.approx(predicted, rel=0.05)

    def test_gamma_doubling_halves_time(self):
        fast = run_residual_decay(gamma=2000.0, n_inits=3, seed=11)
        slow = run_residual_decay(gamma=1000.0, n_inits=3, seed=11)
        for a, b in zip(slow.runs, fast.runs):
            assert a.convergence_time / b.convergence_time == pytest.approx(2.0, rel=0.1)

    def test_determinism(self):
        r1 = run_residual_decay(gamma=1000.0, n_inits=2, seed=5)
        r2 = run_residual_decay(gamma=1000.0, n_inits=2, seed=5)
        for t1, t2 in zip(r1.trajectories, r2.trajectories):
            assert np.array_equal(t1.states, t2.states)
            assert np.array_equal(t1.residuals, t2.residuals)


class TestDegenerate:
    def test_no_solution_flags(self, nosol):
        assert nosol.passed, nosol.flags

    def test_no_solution_plateau(self, nosol):
        floor = nosol.notes["least_squares_residual"]
        assert floor == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)
        for run in nosol.runs:
            assert run.asymptotic_residual == pytest.approx(floor, abs=1e-3)

    def test_multi_solution_flags(self, multi):
        assert multi.passed, multi.flags

    def test_multi_solution_solves_system(self, multi):
        b = multi.problem.b
        for run in multi.runs:
            assert np.linalg.norm(multi.problem.A @ run.final_state - b) <= 1e-6

    def test_lyapunov_monotone(self, nosol, multi):
        for rep in (nosol, multi):
            for run in rep.runs:
                assert run.lyapunov_monotone

    def test_null_component_stationary(self, multi):
        v = np.array([1.0, 1.0, -1.0]) / math.sqrt(3.0)
        for traj in multi.trajectories:
            drift = np.abs((traj.states - traj.states[0]) @ v).max()
            assert drift <= 1e-8


class TestCompareModels:
    def test_unique_all_converge(self):
        p = showcase_unique(seed=3)
        rep = compare_models(p, 1000.0, seed=3)
        assert rep.passed, rep.flags
        assert [r.label for r in rep.runs] == ["GNN", "ZNN", "IZNN", "IGNN"]
        for run in rep.runs:
            assert run.system_class == "ODE"
            assert run.converged
            assert np.linalg.norm(run.final_state - p.x_star) <= 1e-6

    def test_singular_flags_dae(self):
        p = singular_example(Solvability.NO_SOLUTION)
        rep = compare_models(p, 1000.0, seed=1)
        by_label = {r.label: r for r in rep.runs}
        assert by_label["ZNN"].system_class == "DAE"
        assert by_label["IZNN"].system_class == "DAE"
        assert "DAE" in by_label["ZNN"].note
        for label in ("GNN", "IGNN"):
            assert by_label[label].system_class == "ODE"
            assert by_label[label].converged

    def test_orthogonal_rates(self):
        # A.T A = I: GNN decays at gamma, IGNN at gamma/2
        p = gen_prescribed(3, np.ones(3), seed=7)
        gamma = 1000.0
        rep = compare_models(p, gamma, seed=7, t_end=0.03)
        by_label = {r.label: r for r in rep.runs}
        assert by_label["GNN"].fitted_rate == pytest.approx(gamma, rel=0.02)
        assert by_label["IGNN"].fitted_rate == pytest.approx(gamma / 2.0, rel=0.02)

    def test_report_shares_problem_and_h(self):
        p = showcase_unique(seed=5)
        rep = compare_models(p, 500.0, seed=5, h=1e-5)
        assert rep.h == 1e-5
        for traj in rep.trajectories:
            assert traj.meta["h"] == 1e-5
            assert traj.meta["gamma"] == 500.0
