"""Command-line front end.

Subcommands: verify (certificate report), solve (periodic-solution search),
trace (single trajectory to CSV), example (generate and optionally run a
built-in scenario file). Exit codes are a stable contract: 0 success,
1 usage or parse error, 2 certificate or hypothesis failure, 3 runtime or
search failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from types import SimpleNamespace
from typing import List, Optional, Sequence

from .barrier import verify_certificate
from .dynamics import velocity_to_momentum
from .errors import (
    BarrierValidationError,
    ExprError,
    IntegrationError,
    LuminalVelocityError,
    ProblemFileError,
    ReloscError,
    ScenarioValidationError,
    SearchError,
)
from .integrate import EVENT_LUMINAL, TrajectoryEvent, integrate
from .poincare import find_periodic
from .problem_io import (
    LoadedProblem,
    certificate_document,
    dumps_canonical,
    emit_scenario_toml,
    load_problem_file,
    solutions_document,
    trace_events_document,
    write_trajectory_csv,
)
from .scenarios import curve_constrained, pendulum, rotating_field
from .segment import SegmentGeometry

__all__ = ["main", "run"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CERTIFICATE = 2
EXIT_RUNTIME = 3


def _render_checks_text(out: List[str], checks) -> None:
    width = max(len(c.name) for c in checks)
    for c in checks:
        state = "ok  " if c.satisfied else "FAIL"
        out.append(
            f"  {c.name:<{width}}  {state}  margin {c.worst_margin!r}"
            f"  worst t {c.argmin_t!r}"
        )


def _render_verify_text(report, scenario, overall: bool) -> str:
    out = [
        f"certificate: {'PASS' if report.passed else 'FAIL'}"
        f" (grid {report.grid_size}{', refined' if report.refined else ''})"
    ]
    _render_checks_text(out, report.hypotheses)
    if scenario is not None:
        sh = scenario.hypothesis
        out.append(
            f"scenario hypotheses ({scenario.name}): "
            f"{'PASS' if sh.passed else 'FAIL'} (grid {sh.grid_size})"
        )
        _render_checks_text(out, sh.checks)
    out.append(f"overall: {'PASS' if overall else 'FAIL'}")
    return "\n".join(out) + "\n"


def _verify_loaded(loaded: LoadedProblem, grid: Optional[int], refine: Optional[bool],
                   as_json: bool) -> int:
    grid_n = grid if grid is not None else loaded.grid_n
    do_refine = refine if refine is not None else loaded.refine
    report = verify_certificate(loaded.barriers, loaded.problem, grid_n=grid_n,
                                refine=do_refine)
    overall = report.passed and (loaded.scenario is None or loaded.scenario.hypothesis.passed)
    if as_json:
        sys.stdout.write(dumps_canonical(certificate_document(report, loaded.scenario)))
    else:
        sys.stdout.write(_render_verify_text(report, loaded.scenario, overall))
    return EXIT_OK if overall else EXIT_CERTIFICATE


def _solve_loaded(loaded: LoadedProblem, force_search: bool,
                  csv_out: Optional[str]) -> int:
    report = verify_certificate(
        loaded.barriers, loaded.problem, grid_n=loaded.grid_n, refine=loaded.refine
    )
    if not report.passed and not force_search:
        sys.stdout.write(dumps_canonical(certificate_document(report, loaded.scenario)))
        print(
            "error: certificate failed; pass --force-search to search anyway "
            "(results would not be theorem-conforming)",
            file=sys.stderr,
        )
        return EXIT_CERTIFICATE
    geometry = SegmentGeometry(
        loaded.barriers, loaded.problem, report=report, allow_failed=force_search
    )
    solutions = find_periodic(loaded.problem, geometry, loaded.search_options())

    csv_names: List[Optional[str]] = [None] * len(solutions)
    if csv_out is not None:
        out_dir = Path(csv_out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, sol in enumerate(solutions):
            name = f"solution-{i:03d}.csv"
            with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
                write_trajectory_csv(fh, sol.trajectory.csv_rows())
            csv_names[i] = name

    sys.stdout.write(
        dumps_canonical(solutions_document(solutions, report.passed, csv_names))
    )
    return EXIT_OK if any(s.in_band for s in solutions) else EXIT_RUNTIME


def cmd_verify(args: argparse.Namespace) -> int:
    loaded = load_problem_file(args.file)
    return _verify_loaded(loaded, args.grid, args.refine, args.json)


def cmd_solve(args: argparse.Namespace) -> int:
    loaded = load_problem_file(args.file)
    return _solve_loaded(loaded, args.force_search, args.csv_out)


def cmd_trace(args: argparse.Namespace) -> int:
    loaded = load_problem_file(args.file)
    if not (math.isfinite(args.q0) and math.isfinite(args.p0) and math.isfinite(args.t_end)):
        raise ProblemFileError("q0, p0, and t-end must be finite")
    if abs(args.p0) >= 1.0:
        raise ProblemFileError("|p0| must be below 1")
    if args.t_end == 0.0:
        raise ProblemFileError("t-end must be nonzero (traces start at t = 0)")

    walls = SimpleNamespace(barriers=loaded.barriers)
    options = loaded.integrator_options()
    try:
        traj = integrate(0.0, args.q0, args.p0, args.t_end, loaded.problem,
                         options, walls)
        rows = traj.csv_rows()
        events: Sequence[TrajectoryEvent] = traj.events
        completed = traj.completed
        final = rows[-1]
    except LuminalVelocityError:
        # Start already inside the guard margin: emit the guard event at t=0
        # rather than integrating nowhere.
        u0 = velocity_to_momentum(args.p0)
        rows = [(0.0, args.q0, args.p0, u0)]
        events = [TrajectoryEvent(t=0.0, kind=EVENT_LUMINAL)]
        completed = False
        final = rows[0]

    csv_path = Path(args.csv_out)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        write_trajectory_csv(fh, rows)
    sidecar = csv_path.with_suffix(".events.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(trace_events_document(events, completed, final)))
    return EXIT_OK if completed else EXIT_RUNTIME


def cmd_example(args: argparse.Namespace) -> int:
    name = args.name.replace("-", "_")
    if name == "pendulum":
        scenario = pendulum(alpha=args.alpha, gamma=args.gamma, f_ext=args.f_ext,
                            period=args.period)
    elif name == "curve":
        if args.y is None or args.q1 is None or args.q2 is None:
            raise ProblemFileError("example curve requires --y, --q1, and --q2")
        scenario = curve_constrained(
            y=args.y, alpha=args.alpha, gamma=args.gamma, f_ext=args.f_ext,
            period=args.period, q1=args.q1, q2=args.q2,
        )
    else:
        scenario = rotating_field(f_mag=args.f_mag, psi=args.psi, gamma=args.gamma,
                                  period=args.period)

    path = Path(args.emit) if args.emit is not None else Path(f"{args.name}.toml")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_scenario_toml(scenario))
    print(f"wrote {path}", file=sys.stderr)
    if not args.run:
        return EXIT_OK

    loaded = load_problem_file(str(path))
    code = _verify_loaded(loaded, None, None, args.json)
    if code != EXIT_OK:
        return code
    return _solve_loaded(loaded, False, None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relosc",
        description="Certify moving bands and locate periodic solutions of a "
        "periodically forced speed-limited particle.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    v = sub.add_parser("verify", help="check the band certificate of a problem file")
    v.add_argument("file", help="problem file (TOML)")
    v.add_argument("--grid", type=int, default=None, help="time-grid size override")
    v.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                   help="golden-section refinement of worst margins (default on)")
    fmt = v.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="machine-readable report")
    fmt.add_argument("--text", action="store_true", help="human-readable report (default)")
    v.set_defaults(fn=cmd_verify)

    s = sub.add_parser("solve", help="find periodic solutions inside the certified band")
    s.add_argument("file", help="problem file (TOML)")
    s.add_argument("--json", action="store_true",
                   help="accepted for symmetry; solve always prints JSON")
    s.add_argument("--csv-out", dest="csv_out", default=None, metavar="DIR",
                   help="write one trajectory CSV per solution into DIR")
    s.add_argument("--force-search", dest="force_search", action="store_true",
                   help="search even when the certificate fails (non-conforming)")
    s.set_defaults(fn=cmd_solve)

    t = sub.add_parser("trace", help="integrate one trajectory and export it")
    t.add_argument("file", help="problem file (TOML)")
    t.add_argument("--q0", type=float, required=True, help="initial position")
    t.add_argument("--p0", type=float, required=True, help="initial velocity, |p0| < 1")
    t.add_argument("--t-end", dest="t_end", type=float, required=True,
                   help="end time (start is t = 0; negative runs backward)")
    t.add_argument("--csv-out", dest="csv_out", required=True, metavar="PATH",
                   help="trajectory CSV path; events go to PATH with .events.json")
    t.set_defaults(fn=cmd_trace)

    e = sub.add_parser("example", help="emit (and optionally run) a built-in scenario")
    e.add_argument("name", choices=("pendulum", "curve", "rotating-field"))
    e.add_argument("--alpha", type=float, default=1.0, help="restoring coefficient")
    e.add_argument("--gamma", type=float, default=0.0, help="friction coefficient")
    e.add_argument("--f", dest="f_ext", default="0", metavar="EXPR",
                   help="external drive f(t, q, p)")
    e.add_argument("--period", type=float, default=1.0)
    e.add_argument("--y", default=None, metavar="EXPR", help="curve: height profile y(q)")
    e.add_argument("--q1", type=float, default=None, help="curve: left wall")
    e.add_argument("--q2", type=float, default=None, help="curve: right wall")
    e.add_argument("--psi", default="0", metavar="EXPR",
                   help="rotating-field: phase angle psi(t)")
    e.add_argument("--f0", dest="f_mag", default="1", metavar="EXPR",
                   help="rotating-field: magnitude f(t)")
    e.add_argument("--emit", default=None, metavar="PATH",
                   help="output problem file (default <name>.toml)")
    e.add_argument("--run", action="store_true", help="chain verify and solve")
    e.add_argument("--json", action="store_true",
                   help="with --run, print the verify report as JSON")
    e.set_defaults(fn=cmd_example)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point with the exit-code contract; never raises."""
    try:
        return main(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract reserves 2 for
        # certificate failures and uses 1 for usage.
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    except (ProblemFileError, ExprError, BarrierValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except (IntegrationError, SearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ReloscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(run())
