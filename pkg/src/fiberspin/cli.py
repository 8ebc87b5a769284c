"""Command-line interface.

Subcommands: solve | inviscid | bounds | sweep | boundary.  Exit codes form
a stable scripting contract: 0 success, 1 usage or validation error,
2 solver non-convergence, 3 domain or bracket failure.  With --json a single
JSON document is written to stdout and all diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .analysis import classify, existence_criterion, q0_bounds
from .bvp import ContinuationSettings, Outcome, continuation_solve
from .errors import FiberSpinError, NoBracket, ParameterError
from .ivp import IvpConfig, integrate
from .model import SpinParams, inviscid_rhs, reconstruct_centerline
from .sweep import SweepPlan, export, find_boundary, iter_sweep, record_dict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_DOMAIN = 3


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract (usage errors exit 1, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    shared = _Parser(add_help=False)
    shared.add_argument("--delta", type=float, help="viscosity number 3/Re")
    shared.add_argument("--epsilon", type=float, help="Rossby number")
    shared.add_argument("--kappa", type=float, help="surface-tension number, [0,1)")
    shared.add_argument("--length", type=float, default=1.0,
                        help="fiber arc length L (default 1.0)")
    shared.add_argument("--tol", type=float, default=1e-8,
                        help="solver tolerance (default 1e-8)")
    shared.add_argument("--out", help="write delimited results to this path")
    shared.add_argument("--svg", help="render figures to this path (.svg)")
    shared.add_argument("--json", action="store_true",
                        help="emit a single JSON document on stdout")
    shared.add_argument("--jobs", type=int, default=None,
                        help="worker count for sweeps")
    shared.add_argument("--plan", help="sweep plan file")
    shared.add_argument("--step-min-rel", type=float, default=1e-6,
                        help="continuation stops once the delta step falls "
                             "below this fraction of the target (default 1e-6)")
    shared.add_argument("--climb-tol", type=float, default=1e-4,
                        help="tolerance for intermediate continuation solves "
                             "(default 1e-4; final solve uses --tol)")

    parser = _Parser(prog="fiberspin",
                     description="Stationary rotational spinning of viscous fibers")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[shared],
                   help="solve the viscous BVP at one parameter point")
    p_inv = sub.add_parser("inviscid", parents=[shared],
                           help="integrate the inviscid reference fiber")
    p_inv.add_argument("--compare-zero-kappa", action="store_true",
                       help="overlay the kappa=0 run in the figure")
    sub.add_parser("bounds", parents=[shared],
                   help="evaluate the analytic existence bounds")
    sub.add_parser("sweep", parents=[shared],
                   help="run a parameter-grid study from a plan file")
    p_bnd = sub.add_parser("boundary", parents=[shared],
                           help="bisect the empirical convergence boundary in delta")
    p_bnd.add_argument("--resolution", type=float, default=1e-3,
                       help="bracket width target (default 1e-3)")
    p_sweep_extra = sub.choices["sweep"]
    p_sweep_extra.add_argument("--no-timings", action="store_true",
                               help="omit the wall_time column (deterministic output)")
    return parser


def _require(args, names, parser):
    for name in names:
        if getattr(args, name) is None:
            parser.error(f"--{name} is required for this command")


def _params(args) -> SpinParams:
    return SpinParams(args.delta, args.epsilon, args.kappa, args.length)


def _settings(args) -> ContinuationSettings:
    return ContinuationSettings(step_min_rel=args.step_min_rel,
                                climb_tol=args.climb_tol)


def _info(args, text: str) -> None:
    """Report header / progress: stdout normally, stderr in JSON mode."""
    print(text, file=sys.stderr if args.json else sys.stdout)


def _header(args, command: str, params=None) -> None:
    lines = [f"fiberspin {command}"]
    if params is not None:
        lines.append(f"  delta={params.delta:g} epsilon={params.epsilon:g} "
                     f"kappa={params.kappa:g} length={params.length:g}")
    lines.append(f"  tol={args.tol:g} newton_budget=50 initial_mesh=32 "
                 f"node_budget=10000")
    lines.append(f"  continuation: delta_start=0.001 growth=2 "
                 f"step_min_rel={args.step_min_rel:g} climb_tol={args.climb_tol:g}")
    _info(args, "\n".join(lines))


def _config_dict(args, params=None) -> dict:
    cfg = {"tol": args.tol, "newton_budget": 50, "initial_mesh": 32,
           "node_budget": 10000, "delta_start": 1e-3, "growth": 2.0,
           "step_min_rel": args.step_min_rel, "climb_tol": args.climb_tol}
    if params is not None:
        cfg.update(delta=params.delta, epsilon=params.epsilon,
                   kappa=params.kappa, length=params.length)
    return cfg


def _emit_json(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=1)
    sys.stdout.write("\n")


def _write_solution_csv(path, solution) -> None:
    line = reconstruct_centerline(solution)
    states = solution.evaluate(line.s)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "u", "q", "r", "beta", "phi", "x", "y", "area"])
        for i in range(len(line)):
            writer.writerow([format(v, ".17g") for v in
                             (line.s[i], states[0][i], states[1][i], states[2][i],
                              states[3][i], line.phi[i], line.x[i], line.y[i],
                              line.area[i])])


def cmd_solve(args, parser) -> int:
    _require(args, ("delta", "epsilon", "kappa"), parser)
    params = _params(args)
    if params.delta <= 0:
        parser.error("solve requires --delta > 0 (use `inviscid` for delta=0)")
    _header(args, "solve", params)
    report = continuation_solve(params, args.tol, settings=_settings(args))

    doc = {"command": "solve", "config": _config_dict(args, params),
           "outcome": str(report.outcome), "reason": report.reason,
           "continuation_trace": [[d, o] for d, o in report.continuation_trace]}

    if report.converged:
        cls = classify(report.solution, params)
        doc.update(record_dict_like(cls))
        _info(args, _solve_text(cls, report))
        if args.out:
            _write_solution_csv(args.out, report.solution)
            _info(args, f"solution samples written to {args.out}")
        if args.svg:
            from .plots import save_figure, solve_figure
            save_figure(solve_figure(report.solution, params), args.svg)
            _info(args, f"figure written to {args.svg}")
        if args.json:
            _emit_json(doc)
        return EXIT_OK

    _info(args, f"outcome: {report.outcome} ({report.reason})")
    _info(args, "continuation trace: " + ", ".join(
        f"{d:.6g}->{o}" for d, o in report.continuation_trace))
    if args.json:
        _emit_json(doc)
    return EXIT_DOMAIN if report.outcome is Outcome.DOMAIN_EXIT else EXIT_NO_CONVERGENCE


def record_dict_like(cls) -> dict:
    return {
        "q0": cls.q0,
        "p1": cls.p1, "p1_equiv": cls.p1_equiv, "p2": cls.p2, "p3": cls.p3,
        "u_dd0_analytic": cls.u_dd0_analytic,
        "u_dd0_numeric": cls.u_dd0_numeric,
        "uL_dd0_analytic": cls.uL_dd0_analytic,
        "q0_lower_raw": cls.bounds.lower_raw, "q0_upper_raw": cls.bounds.upper_raw,
        "q0_lower": cls.bounds.lower, "q0_upper": cls.bounds.upper,
        "in_bounds": cls.in_bounds,
        "physically_relevant": cls.physically_relevant,
        "existence": str(cls.existence),
    }


def _solve_text(cls, report) -> str:
    lines = [
        f"q0 = {cls.q0:.10g}",
        f"P1 (q0 in (0, 1-kappa]): {cls.p1}   [boundary-sign check: {cls.p1_equiv}]",
        f"P2 (u''(0) < 0): {cls.p2}   u''(0) analytic={cls.u_dd0_analytic:.6g} "
        f"numeric={cls.u_dd0_numeric:.6g}",
        f"P3 (d2uL/dt2(0) > 0): {cls.p3}   value={cls.uL_dd0_analytic:.6g}",
        f"q0 bounds: [{cls.bounds.lower:.6g}, {cls.bounds.upper:.6g}] "
        f"(raw [{cls.bounds.lower_raw:.6g}, {cls.bounds.upper_raw:.6g}]), "
        f"in_bounds={cls.in_bounds}",
        f"existence criterion: {cls.existence}",
        f"physically relevant: {cls.physically_relevant}",
        "continuation trace: " + ", ".join(
            f"{d:.6g}->{o}" for d, o in report.continuation_trace),
    ]
    return "\n".join(lines)


def cmd_inviscid(args, parser) -> int:
    _require(args, ("epsilon", "kappa"), parser)
    params = SpinParams(0.0, args.epsilon, args.kappa, args.length)
    _header(args, "inviscid", params)
    config = IvpConfig(rel_tol=min(args.tol, 1e-8), abs_tol=min(args.tol, 1e-8) * 1e-2)
    y0 = np.array([params.epsilon, 1.0, 0.0])
    traj = integrate(lambda s, y: inviscid_rhs(y, params), y0, (0.0, params.length),
                     config)
    exited = traj.domain_stop is not None or traj.span[1] < params.length

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "v", "r", "beta"])
            for i, s in enumerate(traj.ts):
                writer.writerow([format(x, ".17g") for x in
                                 (s, traj.ys[i, 0], traj.ys[i, 1], traj.ys[i, 2])])
        _info(args, f"trajectory written to {args.out}")

    if args.svg:
        from .plots import inviscid_figure, save_figure
        traj0 = None
        if args.compare_zero_kappa and params.kappa > 0:
            p0 = SpinParams(0.0, params.epsilon, 0.0, params.length)
            traj0 = integrate(lambda s, y: inviscid_rhs(y, p0), y0,
                              (0.0, params.length), config)
        save_figure(inviscid_figure(traj, params, traj0), args.svg)
        _info(args, f"figure written to {args.svg}")

    v_end, r_end, beta_end = traj.end_state
    _info(args, f"s_end={traj.span[1]:.10g} v={v_end:.10g} r={r_end:.10g} "
                f"beta={beta_end:.10g}"
                + (f"  [domain stop: {traj.domain_stop}]" if exited else ""))
    if args.json:
        _emit_json({"command": "inviscid", "config": _config_dict(args, params),
                    "s_end": traj.span[1], "domain_stop": traj.domain_stop,
                    "end_state": {"v": v_end, "r": r_end, "beta": beta_end},
                    "nodes": [[float(traj.ts[i])] + [float(x) for x in traj.ys[i]]
                              for i in range(len(traj.ts))]})
    return EXIT_DOMAIN if exited else EXIT_OK


def cmd_bounds(args, parser) -> int:
    _require(args, ("delta", "epsilon", "kappa"), parser)
    params = _params(args)
    _header(args, "bounds", params)
    crit = existence_criterion(params)
    bounds = q0_bounds(params)
    _info(args, f"p(kappa) = {crit.p_kappa:.10g}")
    _info(args, f"delta/eps^2 = {crit.ratio:.10g}")
    _info(args, f"verdict: {crit.verdict}")
    _info(args, f"q0 bounds raw: [{bounds.lower_raw:.10g}, {bounds.upper_raw:.10g}]")
    _info(args, f"q0 bounds clamped: [{bounds.lower:.10g}, {bounds.upper:.10g}]"
                + ("  (empty: non-existence)" if bounds.empty else ""))
    if args.json:
        _emit_json({"command": "bounds", "config": _config_dict(args, params),
                    "p_kappa": crit.p_kappa, "ratio": crit.ratio,
                    "verdict": str(crit.verdict),
                    "q0_lower_raw": bounds.lower_raw,
                    "q0_upper_raw": bounds.upper_raw,
                    "q0_lower": bounds.lower, "q0_upper": bounds.upper,
                    "empty": bounds.empty})
    return EXIT_OK


def parse_axis(text: str) -> list[float]:
    """Axis spec: 'min:max:count' for a linear range, else a comma list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"range must be min:max:count, got {text!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ParameterError(f"range count must be >= 1 in {text!r}")
        return np.linspace(lo, hi, count).tolist()
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_plan(path, default_tol: float = 1e-8) -> SweepPlan:
    """Flat key=value plan file; one parameter axis per line.

    Keys: delta, epsilon, kappa (axes); length, tol, jobs; continuation
    knobs delta_start, growth, step_min_rel, climb_tol.  '#' starts a
    comment.
    """
    data = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            data[key.strip().lower()] = value.strip()

    axes = {}
    for key in ("delta", "epsilon", "kappa"):
        axes[key] = parse_axis(data.pop(key, ""))
    continuation = ContinuationSettings(
        delta_start=float(data.pop("delta_start", "1e-3")),
        growth=float(data.pop("growth", "2.0")),
        step_min_rel=float(data.pop("step_min_rel", "1e-6")),
        climb_tol=float(data.pop("climb_tol", "1e-4")),
    )
    plan = SweepPlan(
        delta_values=axes["delta"],
        epsilon_values=axes["epsilon"],
        kappa_values=axes["kappa"],
        length=float(data.pop("length", "1.0")),
        tol=float(data.pop("tol", repr(default_tol))),
        jobs=int(data.pop("jobs", "1")),
        continuation=continuation,
    )
    if data:
        raise ParameterError(f"unknown plan keys: {', '.join(sorted(data))}")
    return plan


def cmd_sweep(args, parser) -> int:
    _require(args, ("plan",), parser)
    try:
        plan = parse_plan(args.plan, default_tol=args.tol)
    except OSError as exc:
        parser.error(f"cannot read plan: {exc}")
    if args.jobs is not None:
        plan = SweepPlan(plan.delta_values, plan.epsilon_values, plan.kappa_values,
                         length=plan.length, tol=plan.tol, jobs=args.jobs,
                         continuation=plan.continuation)
    _header(args, "sweep")
    _info(args, f"  plan: {len(plan.points())} grid points, jobs={plan.jobs}, "
                f"tol={plan.tol:g}, length={plan.length:g}")

    records = []
    interrupted = False
    try:
        for rec in iter_sweep(plan):
            records.append(rec)
            _info(args, f"  {rec.params.delta:.6g} {rec.params.epsilon:.6g} "
                        f"{rec.params.kappa:.6g}: {rec.outcome}"
                        + (f" q0={rec.q0:.6g}" if rec.q0 is not None else ""))
    except KeyboardInterrupt:
        interrupted = True
        _info(args, f"interrupted after {len(records)} points; writing partial results")

    include_wall = not args.no_timings
    if args.out:
        export(records, "csv", args.out, include_wall_time=include_wall)
        _info(args, f"records written to {args.out}")
    if args.svg and records:
        from .plots import save_figure, sweep_figure
        save_figure(sweep_figure(records), args.svg)
        _info(args, f"figure written to {args.svg}")
    if args.json:
        _emit_json({"command": "sweep", "config": _config_dict(args),
                    "interrupted": interrupted,
                    "records": [record_dict(r, include_wall) for r in records]})
    return 130 if interrupted else EXIT_OK


def cmd_boundary(args, parser) -> int:
    _require(args, ("epsilon", "kappa"), parser)
    SpinParams(0.0, args.epsilon, args.kappa, args.length)  # validate
    _header(args, "boundary")
    result = find_boundary(args.epsilon, args.kappa, args.length,
                           resolution=args.resolution, tol=args.tol,
                           settings=ContinuationSettings(
                               step_min_rel=max(args.step_min_rel, 1e-3),
                               climb_tol=args.climb_tol))
    _info(args, f"delta bracket: [{result.delta_lo:.10g}, {result.delta_hi:.10g}]")
    _info(args, f"ratio bracket: [{result.ratio_lo:.10g}, {result.ratio_hi:.10g}]")
    _info(args, f"p(kappa) = {result.p_kappa:.10g}")
    _info(args, f"relative gap (p - ratio_hi)/p = {result.relative_gap:.6g}")
    if args.json:
        _emit_json({"command": "boundary", "config": _config_dict(args),
                    "epsilon": result.epsilon, "kappa": result.kappa,
                    "length": result.length,
                    "delta_lo": result.delta_lo, "delta_hi": result.delta_hi,
                    "ratio_lo": result.ratio_lo, "ratio_hi": result.ratio_hi,
                    "p_kappa": result.p_kappa,
                    "relative_gap": result.relative_gap})
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "inviscid": cmd_inviscid,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "boundary": cmd_boundary,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except SystemExit:
        raise
    except ParameterError as exc:
        print(f"fiberspin: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoBracket as exc:
        print(f"fiberspin: no bracket: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except FiberSpinError as exc:
        print(f"fiberspin: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
