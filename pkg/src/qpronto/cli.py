"""Command-line front end: run problem files and compare finished runs.

``qpronto run problem.toml -o outdir`` solves the problem and writes
``trajectory.csv``, ``populations.csv``, ``convergence.jsonl``, and
``summary.json``.  Exit codes: 0 converged, 1 input error, 2 iteration
budget exhausted, 3 line-search stall.  ``qpronto compare a/ b/`` prints a
side-by-side report of two output directories.  Shipped example problems
(``lambda_effort``, ``lambda_penalty``, ``fluxonium_xgate_effort``,
``fluxonium_xgate_penalty``) can be referenced by bare name.
"""

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from .errors import ArmijoStall, MaxIterationsExceeded, ProblemFormatError, QprontoError
from .gates import gate_fidelity, populations
from .problem_io import (
    LoadedProblem,
    load_problem,
    record_to_json,
    write_convergence_jsonl,
    write_populations_csv,
    write_summary_json,
    write_trajectory_csv,
)
from .solver import SolverOptions, solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_STALL = 3


def resolve_problem_path(name: str) -> str:
    """Accept a filesystem path or the bare name of a shipped problem."""
    if os.path.exists(name):
        return name
    if os.sep not in name and not name.endswith(".toml"):
        packaged = resources.files("qpronto").joinpath("problems", f"{name}.toml")
        if packaged.is_file():
            return str(packaged)
    return name


def shipped_problems():
    root = resources.files("qpronto").joinpath("problems")
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def _summarize(loaded: LoadedProblem, result, exit_reason: str) -> dict:
    problem = loaded.problem
    pops = populations(result.trajectory.states, problem.n_levels, problem.n_blocks)
    summary = {
        "problem": loaded.title,
        "converged": result.converged,
        "exit": exit_reason,
        "iterations": result.iterations,
        "final_cost": result.final_cost,
        "final_descent": result.final_descent,
        "peak_populations": {
            f"F_{k}": float(pops[:, :, k].max()) for k in range(problem.n_levels)
        },
    }
    if problem.gate is not None:
        summary["fidelity"] = gate_fidelity(result.trajectory, problem.gate)
    return summary


def _write_run_outputs(outdir: str, loaded: LoadedProblem, result, exit_reason: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    problem = loaded.problem
    xi = result.trajectory
    write_trajectory_csv(os.path.join(outdir, "trajectory.csv"), problem.grid, xi.states, xi.inputs)
    pops = populations(xi.states, problem.n_levels, problem.n_blocks)
    write_populations_csv(os.path.join(outdir, "populations.csv"), problem.grid, pops)
    write_convergence_jsonl(os.path.join(outdir, "convergence.jsonl"), result.records)
    summary = _summarize(loaded, result, exit_reason)
    write_summary_json(os.path.join(outdir, "summary.json"), summary)
    return summary


def cmd_run(args) -> int:
    try:
        loaded = load_problem(resolve_problem_path(args.problem))
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if args.validate_only:
        print(f"{loaded.title}: problem file is valid")
        return EXIT_OK

    opts = SolverOptions(
        tol=args.tol if args.tol is not None else loaded.tol,
        max_iter=args.max_iter if args.max_iter is not None else loaded.max_iter,
        use_regulator=not args.no_regulator,
    )
    on_iteration = None
    if args.verbose:
        on_iteration = lambda rec: print(record_to_json(rec))

    exit_code = EXIT_OK
    exit_reason = "converged"
    try:
        result = solve(loaded.problem, loaded.guess, opts, on_iteration=on_iteration)
    except MaxIterationsExceeded as exc:
        result, exit_code, exit_reason = exc.result, EXIT_MAX_ITER, "max_iterations"
        print(f"warning: {exc}", file=sys.stderr)
    except ArmijoStall as exc:
        result, exit_code, exit_reason = exc.result, EXIT_STALL, "armijo_stall"
        print(f"warning: {exc}", file=sys.stderr)
    except QprontoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    summary = _write_run_outputs(args.output_dir, loaded, result, exit_reason)
    line = (
        f"{loaded.title}: {exit_reason} after {summary['iterations']} iterations, "
        f"final cost {summary['final_cost']:.6e}"
    )
    if "fidelity" in summary:
        line += f", fidelity {summary['fidelity']:.6f}"
    print(line)
    return exit_code


def _load_run_dir(run_dir: str):
    conv = os.path.join(run_dir, "convergence.jsonl")
    summ = os.path.join(run_dir, "summary.json")
    if not os.path.isfile(conv):
        raise ProblemFormatError(f"{run_dir}: convergence.jsonl is missing")
    if not os.path.isfile(summ):
        raise ProblemFormatError(f"{run_dir}: summary.json is missing")
    with open(conv) as handle:
        records = [json.loads(line) for line in handle if line.strip()]
    with open(summ) as handle:
        summary = json.load(handle)
    times = None
    traj = os.path.join(run_dir, "trajectory.csv")
    if os.path.isfile(traj):
        with open(traj) as handle:
            times = [float(line.split(",", 1)[0]) for line in handle.readlines()[1:] if line.strip()]
    return summary, records, times


def compare_report(dir_a: str, dir_b: str) -> str:
    """Side-by-side report of two finished runs."""
    summary_a, records_a, times_a = _load_run_dir(dir_a)
    summary_b, records_b, times_b = _load_run_dir(dir_b)
    if times_a is not None and times_b is not None:
        if len(times_a) != len(times_b) or not np.allclose(times_a, times_b):
            raise ProblemFormatError(
                f"grid mismatch: {dir_a} has {len(times_a)} nodes, {dir_b} has {len(times_b)}"
            )

    lines = [f"comparison: {dir_a} vs {dir_b}", ""]
    rows = [
        ("problem", summary_a.get("problem"), summary_b.get("problem")),
        ("exit", summary_a.get("exit"), summary_b.get("exit")),
        ("iterations", summary_a.get("iterations"), summary_b.get("iterations")),
        ("final cost", summary_a.get("final_cost"), summary_b.get("final_cost")),
    ]
    peaks_a = summary_a.get("peak_populations", {})
    peaks_b = summary_b.get("peak_populations", {})
    for key in sorted(set(peaks_a) | set(peaks_b)):
        rows.append((f"peak {key}", peaks_a.get(key), peaks_b.get(key)))
    if "fidelity" in summary_a or "fidelity" in summary_b:
        rows.append(("fidelity", summary_a.get("fidelity"), summary_b.get("fidelity")))
    for name, left, right in rows:
        lines.append(f"{name:>16}:  {left!s:>24}  {right!s:>24}")

    lines.append("")
    lines.append(f"{'iter':>6}  {'-Dg (A)':>14}  {'-Dg (B)':>14}")
    for i in range(max(len(records_a), len(records_b))):
        neg_a = -records_a[i]["descent"] if i < len(records_a) else None
        neg_b = -records_b[i]["descent"] if i < len(records_b) else None
        fmt = lambda v: f"{v:.6e}" if v is not None else "-"
        lines.append(f"{i:>6}  {fmt(neg_a):>14}  {fmt(neg_b):>14}")
    return "\n".join(lines)


def cmd_compare(args) -> int:
    try:
        print(compare_report(args.run_dir_a, args.run_dir_b))
    except (ProblemFormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpronto",
        description="Projected-Newton trajectory optimization for quantum optimal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="solve a problem file and write result tables")
    run_p.add_argument("problem", help="problem file path or shipped problem name")
    run_p.add_argument("-o", "--output-dir", required=True, help="directory for result tables")
    run_p.add_argument("--tol", type=float, default=None, help="override the exit tolerance")
    run_p.add_argument("--max-iter", type=int, default=None, help="override the iteration budget")
    run_p.add_argument(
        "--no-regulator",
        action="store_true",
        help="force a zero tracking gain (open-loop projection)",
    )
    run_p.add_argument(
        "--validate-only", action="store_true", help="parse and validate, write nothing"
    )
    run_p.add_argument(
        "--verbose", action="store_true", help="stream convergence records as JSON lines"
    )
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="report differences between two finished runs")
    cmp_p.add_argument("run_dir_a")
    cmp_p.add_argument("run_dir_b")
    cmp_p.set_defaults(func=cmd_compare)

    list_p = sub.add_parser("problems", help="list shipped example problems")
    list_p.set_defaults(func=lambda args: print("\n".join(shipped_problems())) or EXIT_OK)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
