"""Problem files in, report documents out.

Input is a TOML document with either an explicit [problem] + [barriers] pair
or a [scenario] section naming a built-in family, plus an optional [solver]
table of tolerance overrides. Output documents are JSON with a fixed field
order and shortest-round-trip float formatting, so identical runs produce
byte-identical reports; their shape is published in schema/report-v1.schema.json.
Trajectories go to CSV with a fixed t,q,p,u header.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import IO, Dict, List, Optional, Sequence, Tuple

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python 3.10
    import tomli as _toml

from .barrier import BarrierPair, CertificateReport
from .dynamics import Problem
from .errors import ProblemFileError
from .expr import parse
from .integrate import IntegratorOptions, TrajectoryEvent
from .poincare import PeriodicSolution, SearchOptions
from .scenarios import Scenario, curve_constrained, pendulum, rotating_field

__all__ = [
    "SCHEMA_NAME",
    "LoadedProblem",
    "load_problem_file",
    "emit_scenario_toml",
    "certificate_document",
    "solutions_document",
    "trace_events_document",
    "dumps_canonical",
    "write_trajectory_csv",
    "load_report_schema",
]

SCHEMA_NAME = "report-v1"

_INTEGRATOR_KEYS = ("rel_tol", "abs_tol", "max_step", "luminal_guard", "max_steps")
_SEARCH_KEYS = (
    "residual_tol",
    "dedupe_radius",
    "band_inset",
    "newton_fd_step",
    "newton_max_iter",
    "cell_min_diameter",
    "boundary_n",
    "boundary_n_max",
    "subdivision_budget",
    "local_index_radius",
)
_CERT_KEYS = ("grid_n", "refine")
_INT_KEYS = frozenset(
    {"max_steps", "newton_max_iter", "boundary_n", "boundary_n_max",
     "subdivision_budget", "grid_n"}
)
_BOOL_KEYS = frozenset({"refine"})


@dataclass
class LoadedProblem:
    """A fully validated problem file: dynamics, walls, optional scenario."""

    problem: Problem
    barriers: BarrierPair
    scenario: Optional[Scenario]
    solver: Dict[str, object]

    def integrator_options(self) -> IntegratorOptions:
        kw = {k: self.solver[k] for k in _INTEGRATOR_KEYS if k in self.solver}
        return IntegratorOptions(**kw)

    def search_options(self) -> SearchOptions:
        kw = {k: self.solver[k] for k in _SEARCH_KEYS if k in self.solver}
        return SearchOptions(integrator=self.integrator_options(), **kw)

    @property
    def grid_n(self) -> Optional[int]:
        return self.solver.get("grid_n")

    @property
    def refine(self) -> bool:
        return bool(self.solver.get("refine", True))


def _require_table(doc: dict, name: str) -> dict:
    section = doc[name]
    if not isinstance(section, dict):
        raise ProblemFileError(f"[{name}] must be a table")
    return section


def _expr_text(value: object, where: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise ProblemFileError(f"{where} must be an expression string, got a boolean")
    if isinstance(value, (int, float)):
        return repr(value)
    raise ProblemFileError(f"{where} must be an expression string")


def _number(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"{where} must be a number")
    x = float(value)
    if not math.isfinite(x):
        raise ProblemFileError(f"{where} must be finite")
    return x


def _reject_unknown(table: dict, allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ProblemFileError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _load_solver(table: dict) -> Dict[str, object]:
    allowed = _INTEGRATOR_KEYS + _SEARCH_KEYS + _CERT_KEYS
    _reject_unknown(table, allowed, "[solver]")
    solver: Dict[str, object] = {}
    for key, value in table.items():
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise ProblemFileError(f"[solver] {key} must be a boolean")
            solver[key] = value
        elif key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ProblemFileError(f"[solver] {key} must be an integer")
            solver[key] = value
        else:
            solver[key] = _number(value, f"[solver] {key}")
    return solver


def _build_scenario(table: dict) -> Scenario:
    if "name" not in table:
        raise ProblemFileError("[scenario] requires a name")
    name = table["name"]
    if not isinstance(name, str):
        raise ProblemFileError("[scenario] name must be a string")
    name = name.replace("-", "_")

    def opt_num(key: str, default: float) -> float:
        return _number(table[key], f"[scenario] {key}") if key in table else default

    def req_num(key: str) -> float:
        if key not in table:
            raise ProblemFileError(f"[scenario] {name} requires {key}")
        return _number(table[key], f"[scenario] {key}")

    def opt_expr(key: str, default: str) -> str:
        return _expr_text(table[key], f"[scenario] {key}") if key in table else default

    def req_expr(key: str) -> str:
        if key not in table:
            raise ProblemFileError(f"[scenario] {name} requires {key}")
        return _expr_text(table[key], f"[scenario] {key}")

    if name == "pendulum":
        _reject_unknown(table, ("name", "alpha", "gamma", "f_ext", "period"), "[scenario]")
        return pendulum(
            alpha=req_num("alpha"),
            gamma=opt_num("gamma", 0.0),
            f_ext=opt_expr("f_ext", "0"),
            period=opt_num("period", 1.0),
        )
    if name == "curve":
        _reject_unknown(
            table, ("name", "y", "alpha", "gamma", "f_ext", "period", "q1", "q2"),
            "[scenario]",
        )
        return curve_constrained(
            y=req_expr("y"),
            alpha=req_num("alpha"),
            gamma=opt_num("gamma", 0.0),
            f_ext=opt_expr("f_ext", "0"),
            period=opt_num("period", 1.0),
            q1=req_num("q1"),
            q2=req_num("q2"),
        )
    if name == "rotating_field":
        _reject_unknown(
            table, ("name", "f_mag", "psi", "gamma", "period"), "[scenario]"
        )
        return rotating_field(
            f_mag=req_expr("f_mag"),
            psi=opt_expr("psi", "0"),
            gamma=opt_num("gamma", 0.0),
            period=opt_num("period", 1.0),
        )
    raise ProblemFileError(f"unknown scenario name {name!r}")


def load_problem_file(path: str) -> LoadedProblem:
    """Parse and validate a problem file; returns the assembled objects.

    Raises ProblemFileError with the offending field for structural issues;
    expression and barrier validation errors propagate from their modules.
    """
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except FileNotFoundError:
        raise ProblemFileError(f"{path}: no such file") from None
    except _toml.TOMLDecodeError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None

    _reject_unknown(doc, ("problem", "barriers", "solver", "scenario"), "the document")
    has_explicit = "problem" in doc or "barriers" in doc
    has_scenario = "scenario" in doc
    if has_scenario and has_explicit:
        raise ProblemFileError("[scenario] excludes [problem] and [barriers]")
    if not has_scenario and not ("problem" in doc and "barriers" in doc):
        raise ProblemFileError(
            "either [scenario] or both [problem] and [barriers] are required"
        )

    solver = _load_solver(_require_table(doc, "solver")) if "solver" in doc else {}

    if has_scenario:
        scenario = _build_scenario(_require_table(doc, "scenario"))
        return LoadedProblem(
            problem=scenario.problem,
            barriers=scenario.barriers,
            scenario=scenario,
            solver=solver,
        )

    ptab = _require_table(doc, "problem")
    _reject_unknown(ptab, ("force", "period", "topology"), "[problem]")
    if "force" not in ptab or "period" not in ptab:
        raise ProblemFileError("[problem] requires force and period")
    period = _number(ptab["period"], "[problem] period")
    if period <= 0.0:
        raise ProblemFileError("[problem] period must be positive")
    topology = ptab.get("topology", "line")
    if topology not in ("line", "circle"):
        raise ProblemFileError('[problem] topology must be "line" or "circle"')
    force = parse(_expr_text(ptab["force"], "[problem] force"))
    problem = Problem(force=force, period=period, topology=topology)

    btab = _require_table(doc, "barriers")
    _reject_unknown(btab, ("h1", "h2"), "[barriers]")
    if "h1" not in btab or "h2" not in btab:
        raise ProblemFileError("[barriers] requires h1 and h2")
    barriers = BarrierPair(
        h1=parse(_expr_text(btab["h1"], "[barriers] h1"), ("t",)),
        h2=parse(_expr_text(btab["h2"], "[barriers] h2"), ("t",)),
        period=period,
    )
    return LoadedProblem(problem=problem, barriers=barriers, scenario=None, solver=solver)


def _toml_value(value: object) -> str:
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("cannot emit a non-finite number")
        return repr(value)
    raise TypeError(f"cannot emit {type(value).__name__} to TOML")


def emit_scenario_toml(scenario: Scenario) -> str:
    """Render a scenario as a problem file; loading it back is lossless."""
    lines = ["[scenario]", f'name = "{scenario.name}"']
    for key, value in scenario.params.items():
        lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _margin_json(x: float) -> Optional[float]:
    return None if not math.isfinite(x) else x


def _checks_json(checks) -> List[dict]:
    return [
        {
            "name": c.name,
            "satisfied": c.satisfied,
            "worst_margin": _margin_json(c.worst_margin),
            "argmin_t": c.argmin_t,
        }
        for c in checks
    ]


def certificate_document(
    report: CertificateReport, scenario: Optional[Scenario] = None
) -> dict:
    """The verify report: generic certificate plus scenario-specific checks."""
    hyp = None
    passed = report.passed
    if scenario is not None:
        sh = scenario.hypothesis
        hyp = {
            "scenario": scenario.name,
            "passed": sh.passed,
            "grid_size": sh.grid_size,
            "hypotheses": _checks_json(sh.checks),
        }
        passed = passed and sh.passed
    return {
        "schema": SCHEMA_NAME,
        "kind": "certificate",
        "passed": passed,
        "certificate": {
            "passed": report.passed,
            "grid_size": report.grid_size,
            "refined": report.refined,
            "hypotheses": _checks_json(report.hypotheses),
        },
        "scenario_hypotheses": hyp,
    }


def solutions_document(
    solutions: Sequence[PeriodicSolution],
    certificate_passed: bool,
    csv_names: Optional[Sequence[Optional[str]]] = None,
) -> dict:
    """The solve report. conforming is False for a forced, uncertified search."""
    if csv_names is None:
        csv_names = [None] * len(solutions)
    rows = []
    for sol, csv_name in zip(solutions, csv_names):
        row = sol.as_dict()
        row["csv"] = csv_name
        rows.append(row)
    return {
        "schema": SCHEMA_NAME,
        "kind": "solutions",
        "conforming": bool(certificate_passed),
        "certificate_passed": bool(certificate_passed),
        "count": len(rows),
        "solutions": rows,
    }


def trace_events_document(
    events: Sequence[TrajectoryEvent],
    completed: bool,
    final: Tuple[float, float, float, float],
) -> dict:
    ft, fq, fp, fu = final
    return {
        "schema": SCHEMA_NAME,
        "kind": "trace_events",
        "completed": bool(completed),
        "events": [{"t": ev.t, "kind": ev.kind} for ev in events],
        "final": {"t": ft, "q": fq, "p": fp, "u": fu},
    }


def dumps_canonical(doc: dict) -> str:
    """Fixed-layout JSON: insertion-ordered keys, repr floats, no NaN/inf."""
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_trajectory_csv(fh: IO[str], rows: Sequence[Tuple[float, float, float, float]]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("t", "q", "p", "u"))
    for t, q, p, u in rows:
        writer.writerow((repr(t), repr(q), repr(p), repr(u)))


def load_report_schema() -> dict:
    """The published JSON schema all report documents validate against."""
    text = resources.files("relosc").joinpath("schema/report-v1.schema.json").read_text()
    return json.loads(text)
