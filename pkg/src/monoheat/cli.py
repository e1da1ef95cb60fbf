"""Command line front end.

Commands: ``graph-check``, ``solve``, ``continuation``, ``convergence``
and ``dependence``.  Diagnostics go to standard error; data goes to files
in the output directory (``solution.csv``, ``boundary.csv``,
``estimates.csv``, ``summary.txt``).  Exit codes: 0 success, 1 solver
failure, 2 violated bound or dependence margin or graph property,
3 configuration error.

Identical configuration and build produce byte-identical outputs; floats
are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import graphs as gr
from . import verification as ver
from .config import COMMANDS, RunConfig, parse_config
from .errors import (
    ConfigError,
    EmptyBoundary,
    SolverError,
    ValidationError,
    ViolationError,
)
from .fem import assemble, build_mesh_1d, build_mesh_rect, dump_mesh, trace_constant
from .stepper import lambda_continuation, solve_transient


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: Path, items):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in items:
            fh.write(f"{key} = {_fmt(value)}\n")


def _sweep_workers() -> int:
    raw = os.environ.get("MONOHEAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_state_files(out: Path, state, mesh):
    rows = []
    for k, t in enumerate(state.times):
        for i in range(mesh.n_nodes):
            rows.append((k, t, i, state.u[k, i], state.v[k, i]))
    _write_csv(out / "solution.csv", ("k", "t", "node_id", "u", "v"), rows)
    g1 = mesh.gamma1_nodes
    rows = []
    for k, t in enumerate(state.times):
        for i in g1:
            rows.append((k, t, int(i), state.xi[k, i]))
    _write_csv(out / "boundary.csv", ("k", "t", "node_id", "xi"), rows)


_CONST_COLS = ("C1", "C2", "A1", "A2", "A3", "M1", "M2", "L", "C_tr",
               "B1", "B2", "D1", "D2")


def _write_estimates(out: Path, report):
    header = ("k", "t", "l2_u", "h1_u", "grad_sq_cum", "phi_star", "bhat_l1",
              "boundary_work", "boundary_flux_sq", "dual_rate") + _CONST_COLS
    rows = []
    for k, t in enumerate(report.times):
        rows.append((k, t, report.l2_u[k], np.sqrt(report.h1_sq_u[k]),
                     report.grad_sq_cum[k], report.phi_star[k],
                     report.bhat_l1[k], report.boundary_work[k],
                     report.boundary_flux_sq[k], report.dual_rate[k])
                    + ("",) * len(_CONST_COLS))
    summary = ["summary", report.times[-1]] + [""] * 8
    for name in _CONST_COLS:
        summary.append(report.constants.get(name, ""))
    rows.append(tuple(summary))
    _write_csv(out / "estimates.csv", header, rows)


def _report_items(report):
    items = [(f"constant.{k}", v) for k, v in sorted(report.constants.items())]
    for check in report.bound_checks:
        items.append((f"bound.{check.name}.value", check.bound))
        items.append((f"bound.{check.name}.monitored", check.monitored))
        items.append((f"bound.{check.name}.pass", check.passed))
    items.append(("bounds.all_pass", report.all_bounds_pass))
    return items


def _verified_report(state, spec, ops, summary):
    """Monitors always; bound constants when the chain applies at this tau."""
    report = ver.energy_monitors(state, spec, ops)
    try:
        c_tr = trace_constant(ops)
    except EmptyBoundary:
        summary.append(("bounds.evaluated", False))
        summary.append(("bounds.skip_reason", "no active boundary"))
        return report, 0
    try:
        report = ver.apriori_bounds(
            report, spec.gamma.scaled(spec.c0).constants(), spec.beta.constants(),
            ver.data_norms(spec, ops, state), c_tr, raise_on_violation=False)
    except ValidationError as exc:
        summary.append(("bounds.evaluated", False))
        summary.append(("bounds.skip_reason", str(exc)))
        return report, 0
    summary.append(("bounds.evaluated", True))
    summary.extend(_report_items(report))
    return report, (0 if report.all_bounds_pass else 2)


def _cmd_graph_check(rc: RunConfig, out: Path) -> int:
    opts = rc.graph_check
    lambdas = opts.get("lambdas") or [1.0, 0.5, 0.25, 0.125]
    samples = opts.get("samples")
    if samples is None:
        samples = np.linspace(-3.0, 3.0, 25)
    tol = opts.get("tolerance")
    rows = []
    all_pass = True
    summary = [("command", "graph-check"), ("lambdas", len(lambdas)),
               ("samples", len(samples))]
    for graph in gr.builtin_graphs():
        gr.audit_constants(graph)
        report = gr.graph_property_suite(graph, lambdas, samples, tol=tol)
        all_pass &= report.passed
        summary.append((f"graph.{graph.label}.pass", report.passed))
        summary.append((f"graph.{graph.label}.worst_error", report.worst_error()))
        for c in report.checks:
            rows.append((graph.label, c.prop,
                         "" if c.lam is None else c.lam,
                         "" if c.x is None else c.x,
                         c.passed, c.error))
    _write_csv(out / "estimates.csv",
               ("graph", "property", "lambda", "x", "passed", "error"), rows)
    summary.append(("all_pass", all_pass))
    _write_summary(out / "summary.txt", summary)
    return 0 if all_pass else 2


def _cmd_solve(rc: RunConfig, out: Path) -> int:
    spec, cfg = rc.problem, rc.solver
    ops = assemble(spec.mesh)
    state = solve_transient(spec, cfg, ops=ops)
    _write_state_files(out, state, spec.mesh)
    if rc.dump_mesh:
        dump_mesh(spec.mesh, out / "mesh_nodes.csv", out / "mesh_elements.csv")
    summary = [("command", "solve"), ("nodes", spec.mesh.n_nodes),
               ("steps", state.n_steps), ("lambda", state.lam),
               ("tau", state.tau),
               ("max_iterations", int(state.iterations.max(initial=0))),
               ("max_residual", float(state.residuals.max(initial=0.0))),
               ("solver_disagreement", state.disagreement)]
    report, code = _verified_report(state, spec, ops, summary)
    _write_estimates(out, report)
    _write_summary(out / "summary.txt", summary)
    return code


def _cmd_continuation(rc: RunConfig, out: Path) -> int:
    spec, cfg = rc.problem, rc.solver
    ops = assemble(spec.mesh)
    runs = lambda_continuation(spec, cfg, ops=ops, workers=_sweep_workers())
    lam_final, state, _ = runs[-1]
    _write_state_files(out, state, spec.mesh)
    summary = [("command", "continuation"), ("nodes", spec.mesh.n_nodes),
               ("levels", len(runs)), ("lambda_final", lam_final)]
    diffs = []
    for lam, _, diff in runs:
        if diff is not None:
            summary.append((f"continuation.cauchy_diff.{_fmt(lam)}", diff))
            diffs.append(diff)
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    summary.append(("continuation.monotone_decreasing", decreasing))
    report, code = _verified_report(state, spec, ops, summary)
    _write_estimates(out, report)
    _write_summary(out / "summary.txt", summary)
    return code


def _cmd_convergence(rc: RunConfig, out: Path) -> int:
    conv = rc.convergence
    dim = conv["dim"]
    length = conv["length"]

    def make_template(n):
        m = (build_mesh_1d(length, n, conv["gamma1"]) if dim == 1
             else build_mesh_rect(length, length, n, n, True))
        return ver.ProblemTemplate(mesh=m, c0=conv["c0"], gamma=conv["gamma"],
                                   beta=conv["beta"], T=conv["T"])

    exact_space = ver.ManufacturedSolution(conv["exact_space"], dim)
    exact_time = ver.ManufacturedSolution(conv["exact_time"], dim)
    res_space = ver.convergence_order(
        make_template, exact_space, conv["space_levels"],
        conv["time_levels"], conv["fine_space"], conv["fine_time"], rc.solver)
    res_time = ver.convergence_order(
        make_template, exact_time, conv["space_levels"],
        conv["time_levels"], conv["fine_space"], conv["fine_time"], rc.solver)

    rows = []
    for h, e in res_space["errors_space"]:
        rows.append(("space", h, e))
    for t, e in res_time["errors_time"]:
        rows.append(("time", t, e))
    _write_csv(out / "estimates.csv", ("axis", "h_or_tau", "error"), rows)
    _write_summary(out / "summary.txt", [
        ("command", "convergence"),
        ("order_space", res_space["order_space"]),
        ("order_time", res_time["order_time"]),
    ])
    return 0


def _cmd_dependence(rc: RunConfig, out: Path) -> int:
    ops = assemble(rc.problem.mesh)
    report = ver.dependence_check(rc.problem, rc.problem2, rc.solver, ops=ops)
    _write_csv(out / "estimates.csv",
               ("name", "value"),
               [("lhs", report.lhs), ("rhs", report.rhs),
                ("c_dep", report.c_dep), ("margin", report.margin)])
    _write_summary(out / "summary.txt", [
        ("command", "dependence"),
        ("alpha_eff", report.alpha_eff),
        ("lhs", report.lhs),
        ("lhs.sup_sq_l2", report.sup_sq_l2),
        ("lhs.grad_sq_l2l2", report.grad_sq_l2l2),
        ("rhs", report.rhs),
        ("rhs.initial", report.rhs_initial),
        ("rhs.g", report.rhs_g),
        ("rhs.h", report.rhs_h),
        ("c_dep", report.c_dep),
        ("margin", report.margin),
        ("margin_nonnegative", report.margin >= 0.0),
    ])
    return 0 if report.margin >= 0.0 else 2


_DISPATCH = {
    "graph-check": _cmd_graph_check,
    "solve": _cmd_solve,
    "continuation": _cmd_continuation,
    "convergence": _cmd_convergence,
    "dependence": _cmd_dependence,
}


def run(rc: RunConfig) -> int:
    """Execute one parsed command, mapping errors to exit codes."""
    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for warning in rc.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    try:
        return _DISPATCH[rc.command](rc, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except ViolationError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 2


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="monoheat",
        description="doubly nonlinear heat flow solver and estimate checker")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="configuration file (key = value grammar)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--dump-mesh", action="store_true",
                        help="also write mesh_nodes.csv and mesh_elements.csv")
    strict = parser.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_true", default=True)
    strict.add_argument("--no-strict", dest="strict", action="store_false")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    text = ""
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            print(f"error: config file {path} does not exist", file=sys.stderr)
            return 3
        text = path.read_text(encoding="utf-8")
    elif args.command != "graph-check":
        print("error: --config is required for this command", file=sys.stderr)
        return 3
    try:
        rc = parse_config(text, command=args.command, strict=args.strict)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    rc.out_dir = args.out
    rc.dump_mesh = getattr(args, "dump_mesh", False)
    return run(rc)


if __name__ == "__main__":
    sys.exit(main())
