"""Command-line front end: run models, emit CSV trajectories and JSON reports.

Exit codes are a total function of the outcome:

    0   converged / settled / report passed
    2   did not converge, did not settle, or the state diverged
    3   model refused: DAE (singular mass matrix)
    64  usage error (bad flags, unknown experiment, unreadable problem)

Times are printed in milliseconds; the CSV schema is
``t_ms,residual,lyapunov,x_0,...,x_{n-1}`` with 17-significant-digit
decimals so parsing the file back is lossless.  ``NEURODYN_SEED``
overrides the default seed when ``--seed`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments, linalg
from .integrate import DaeNotIntegrable, NonFiniteState, Trajectory, integrate, prefactorize
from .models import LinearProblem, ModelKind, Solvability, build_model, build_problem

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_DAE = 3
EXIT_USAGE = 64

DEFAULT_THRESHOLD = math.exp(-7.0)
EXPERIMENTS = ("fig1", "fig2-nosol", "fig2-multi", "compare")


class CliError(Exception):
    """Usage-level problem; mapped to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _default_seed() -> int:
    raw = os.environ.get("NEURODYN_SEED", "").strip()
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise CliError(f"NEURODYN_SEED must be an integer, got {raw!r}") from exc
    return 0


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(path, traj: Trajectory) -> None:
    n = traj.states.shape[1]
    lyap = traj.lyapunov
    if lyap is None:
        lyap = np.full(traj.times.shape[0], np.nan)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "residual", "lyapunov"] + [f"x_{i}" for i in range(n)])
        for t, r, ly, state in zip(traj.times, traj.residuals, lyap, traj.states):
            writer.writerow(
                [_fmt(1000.0 * t), _fmt(r), _fmt(ly)] + [_fmt(v) for v in state]
            )


def read_trajectory_csv(path):
    """Parse a trajectory CSV back into (times_s, residuals, lyapunov, states)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n = len(header) - 3
    times = np.array([float(r[0]) for r in data]) / 1000.0
    residuals = np.array([float(r[1]) for r in data])
    lyapunov = np.array([float(r[2]) for r in data])
    states = np.array([[float(v) for v in r[3 : 3 + n]] for r in data])
    return times, residuals, lyapunov, states


def _problem_dict(problem: LinearProblem) -> dict:
    return {
        "n": problem.n,
        "solvability": problem.solvability.value,
        "A": problem.A.tolist(),
        "b": problem.b.tolist(),
    }


def _rates_dict(rates: analysis.RateReport) -> dict:
    return {
        "alpha": rates.alpha,
        "beta": rates.beta,
        "guaranteed_rate": rates.guaranteed_rate,
        "modal_rate": rates.modal_rate,
        "gamma": rates.gamma,
        "fitted_rate": rates.fitted_rate,
    }


def _run_dict(run: experiments.RunSummary) -> dict:
    return {
        "label": run.label,
        "x0": run.x0.tolist(),
        "system_class": run.system_class,
        "final_state": None if run.final_state is None else run.final_state.tolist(),
        "final_residual": run.final_residual,
        "fitted_rate": run.fitted_rate,
        "convergence_time_ms": None
        if run.convergence_time is None
        else 1000.0 * run.convergence_time,
        "asymptotic_residual": run.asymptotic_residual,
        "residual_monotone": run.residual_monotone,
        "lyapunov_monotone": run.lyapunov_monotone,
        "converged": run.converged,
        "note": run.note,
    }


def report_to_dict(report: experiments.ExperimentReport) -> dict:
    return {
        "scenario": report.scenario,
        "seed": report.seed,
        "gamma": report.gamma,
        "h": report.h,
        "stride": report.stride,
        "t_end_ms": 1000.0 * report.t_end,
        "problem": _problem_dict(report.problem),
        "rates": _rates_dict(report.rates),
        "flags": report.flags,
        "passed": report.passed,
        "notes": report.notes,
        "runs": [_run_dict(r) for r in report.runs],
    }


def _write_json(path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _load_problem(args) -> LinearProblem:
    sources = int(args.problem is not None) + int(args.matrix is not None) + int(
        args.gen is not None
    )
    if sources > 1:
        raise CliError("give exactly one problem source (--problem, --matrix/--rhs or --gen)")
    if args.problem is not None:
        try:
            data = json.loads(Path(args.problem).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read problem file {args.problem}: {exc}") from exc
        try:
            n = int(data["n"])
            A = np.asarray(data["A"], dtype=np.float64)
            b = np.asarray(data["b"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"problem file needs fields n, A, b: {exc}") from exc
        if A.ndim == 1:
            if A.shape[0] != n * n:
                raise CliError(f"A has {A.shape[0]} entries, expected n*n = {n * n}")
            A = A.reshape(n, n)
        return build_problem(A, b)
    if args.matrix is not None or args.rhs is not None:
        if args.matrix is None or args.rhs is None:
            raise CliError("--matrix and --rhs must be given together")
        try:
            A = json.loads(args.matrix)
            b = json.loads(args.rhs)
        except json.JSONDecodeError as exc:
            raise CliError(f"--matrix/--rhs must be JSON arrays: {exc}") from exc
        return build_problem(A, b)
    if args.gen is not None:
        if args.gen == "prescribed":
            if args.sigma is not None:
                sigma = tuple(float(s) for s in args.sigma.split(","))
            else:
                sigma = experiments.DEFAULT_SIGMA
            n = args.n if args.n is not None else len(sigma)
            return experiments.gen_prescribed(n, sigma, args.seed)
        if args.gen == "singular-nosol":
            return experiments.singular_example(Solvability.NO_SOLUTION)
        if args.gen == "singular-multi":
            return experiments.singular_example(Solvability.MULTI_SOLUTION)
        raise CliError(f"unknown generator {args.gen!r}")
    raise CliError("no problem source given (use --problem, --matrix/--rhs or --gen)")


def _auto_t_end(problem: LinearProblem, gamma: float) -> float:
    base = 0.06 if problem.solvability is Solvability.UNIQUE else 0.1
    return base * (1000.0 / gamma)


def _run_single(args):
    """Shared setup for solve/simulate: build, integrate, analyze."""
    problem = _load_problem(args)
    kind = ModelKind[args.model.upper()]
    model = build_model(kind, problem, args.gamma)
    solvable = prefactorize(model)
    t_end = args.t_end_ms / 1000.0 if args.t_end_ms is not None else _auto_t_end(
        problem, args.gamma
    )
    if args.x0 is not None:
        try:
            x0 = linalg.as_vector(json.loads(args.x0))
        except (json.JSONDecodeError, ValueError) as exc:
            raise CliError(f"--x0 must be a JSON array: {exc}") from exc
    else:
        x0 = np.random.default_rng(args.seed).uniform(-2.0, 2.0, problem.n)
    traj = integrate(
        solvable,
        x0,
        t_end,
        h=args.h,
        stride=args.stride,
        lyapunov_fn=analysis.lyapunov_evaluator(problem),
        meta={"seed": args.seed},
    )
    return problem, model, traj


def cmd_solve(args) -> int:
    try:
        problem, model, traj = _run_single(args)
    except DaeNotIntegrable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DAE
    except NonFiniteState as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    rates = analysis.theoretical_rates(problem, args.gamma)
    ct = analysis.convergence_time(traj, args.threshold)
    settled = None
    settle_note = ""
    try:
        settled = analysis.asymptotic_residual(traj)
    except analysis.NotSettled as exc:
        settle_note = str(exc)
    if problem.solvability is Solvability.UNIQUE:
        converged = ct is not None
    else:
        converged = settled is not None
    report = {
        "model": model.kind.value,
        "gamma": model.gamma,
        "h": traj.meta["h"],
        "stride": traj.meta["stride"],
        "seed": args.seed,
        "t_end_ms": 1000.0 * traj.t_end,
        "threshold": args.threshold,
        "problem": _problem_dict(problem),
        "system_class": model.system_class.value,
        "final_state": traj.states[-1].tolist(),
        "final_residual": float(traj.residuals[-1]),
        "convergence_time_ms": None if ct is None else 1000.0 * ct,
        "asymptotic_residual": settled,
        "settle_note": settle_note,
        "rates": _rates_dict(rates),
        "converged": converged,
    }
    _write_json(args.out, report)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    try:
        problem, model, traj = _run_single(args)
    except DaeNotIntegrable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DAE
    except NonFiniteState as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    out = Path(args.out if args.out is not None else "trajectory.csv")
    write_trajectory_csv(out, traj)
    sidecar = {
        "csv": out.name,
        "model": model.kind.value,
        "gamma": model.gamma,
        "h": traj.meta["h"],
        "stride": traj.meta["stride"],
        "seed": args.seed,
        "t_end_ms": 1000.0 * traj.t_end,
        "n": problem.n,
        "system_class": model.system_class.value,
        "solvability": problem.solvability.value,
        "samples": int(traj.times.shape[0]),
    }
    _write_json(out.with_suffix(".meta.json"), sidecar)
    print(f"wrote {out} ({traj.times.shape[0]} samples)")
    return EXIT_OK


def cmd_experiment(args) -> int:
    name = args.name
    seed = args.seed
    gamma = args.gamma
    t_end = args.t_end_ms / 1000.0 if args.t_end_ms is not None else None
    if name == "fig1":
        report = experiments.run_residual_decay(
            gamma=gamma, n_inits=args.inits, seed=seed, t_end=t_end, h=args.h
        )
    elif name == "fig2-nosol":
        report = experiments.run_degenerate(
            Solvability.NO_SOLUTION, gamma=gamma, n_inits=args.inits, seed=seed,
            t_end=t_end, h=args.h,
        )
    elif name == "fig2-multi":
        report = experiments.run_degenerate(
            Solvability.MULTI_SOLUTION, gamma=gamma, n_inits=args.inits, seed=seed,
            t_end=t_end, h=args.h,
        )
    elif name == "compare":
        if args.singular:
            problem = experiments.singular_example(Solvability.NO_SOLUTION)
        else:
            problem = experiments.showcase_unique(seed=seed)
        report = experiments.compare_models(
            problem, gamma=gamma, t_end=t_end, h=args.h, seed=seed
        )
    else:  # unreachable: argparse validates choices
        raise CliError(f"unknown experiment {name!r}")

    out_dir = Path(args.out_dir if args.out_dir is not None else f"runs/{name}")
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [r.label for r in report.runs if r.system_class == "ODE"]
    for label, traj in zip(labels, report.trajectories):
        write_trajectory_csv(out_dir / f"{name}_{label}.csv", traj)
    _write_json(out_dir / f"{name}_report.json", report_to_dict(report))
    for key, ok in report.flags.items():
        print(f"{name}: {key} = {'ok' if ok else 'FAILED'}")
    for run in report.runs:
        if run.system_class == "DAE":
            print(f"{name}: {run.label} not integrable (DAE)")
    print(f"report: {out_dir / f'{name}_report.json'}")
    return EXIT_OK if report.passed else EXIT_NOT_CONVERGED


def cmd_rates(args) -> int:
    problem = _load_problem(args)
    rates = analysis.theoretical_rates(problem, args.gamma)
    payload = _rates_dict(rates)
    payload["solvability"] = problem.solvability.value
    _write_json(args.out, payload)
    return EXIT_OK


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="JSON file with fields n, A (row-major), b")
    p.add_argument("--matrix", help="inline coefficient matrix as a JSON array of rows")
    p.add_argument("--rhs", help="inline right-hand side as a JSON array")
    p.add_argument(
        "--gen",
        choices=["prescribed", "singular-nosol", "singular-multi"],
        help="named problem generator",
    )
    p.add_argument("--n", type=int, help="size for --gen prescribed")
    p.add_argument("--sigma", help="comma-separated singular values for --gen prescribed")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="IGNN", choices=[k.value for k in ModelKind])
    p.add_argument("--gamma", type=float, default=1000.0)
    p.add_argument("--h", type=float, default=None, help="step size in seconds (default: auto)")
    p.add_argument("--t-end-ms", type=float, default=None, dest="t_end_ms")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--x0", help="initial state as a JSON array (default: seeded random)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="output path (default: stdout for reports)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neurodyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="integrate until converged and report")
    _add_problem_flags(p_solve)
    _add_run_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="integrate and write a trajectory CSV")
    _add_problem_flags(p_sim)
    _add_run_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_exp = sub.add_parser("experiment", help="run a scripted experiment")
    p_exp.add_argument("name", choices=EXPERIMENTS)
    p_exp.add_argument("--gamma", type=float, default=1000.0)
    p_exp.add_argument("--inits", type=int, default=6)
    p_exp.add_argument("--t-end-ms", type=float, default=None, dest="t_end_ms")
    p_exp.add_argument("--h", type=float, default=None)
    p_exp.add_argument("--singular", action="store_true", help="compare on the singular showcase")
    p_exp.add_argument("--out-dir", dest="out_dir", help="output directory (default runs/<name>)")
    p_exp.set_defaults(func=cmd_experiment)

    p_rates = sub.add_parser("rates", help="print the rate report for a problem")
    _add_problem_flags(p_rates)
    p_rates.add_argument("--gamma", type=float, default=1000.0)
    p_rates.add_argument("--out")
    p_rates.set_defaults(func=cmd_rates)

    for p in (p_solve, p_sim, p_exp, p_rates):
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse --help
        return 0 if exc.code in (0, None) else EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
