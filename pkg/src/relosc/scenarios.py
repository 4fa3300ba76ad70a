"""Ready-made problem families: the pendulum, a profile-constrained bead, and
a rotating force field, each packaged with its canonical walls and the cheap
sufficient conditions that make the full certificate pass.

Each constructor assembles the force law, the canonical barrier pair, and a
hypothesis report checked on a time grid with local refinement. A failed
hypothesis is an outcome, not an exception: the scenario is still returned,
and the generic certificate can be run regardless. Structural problems (a
profile whose endpoint slopes are wrong, an expression using a variable it
must not) do raise, since no meaningful scenario exists then.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

from .barrier import BarrierPair, HypothesisCheck, _golden_min, suggest_grid
from .dynamics import Problem
from .errors import ScenarioValidationError
from .expr import Expression, parse

__all__ = [
    "Scenario",
    "ScenarioHypothesisReport",
    "pendulum",
    "curve_constrained",
    "rotating_field",
]

_PROFILE_SLOPE_TOL = 1e-6


@dataclass(frozen=True)
class ScenarioHypothesisReport:
    """Scenario-specific sufficient conditions, graded like the certificate."""

    checks: Tuple[HypothesisCheck, ...]
    grid_size: int
    passed: bool

    def check(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class Scenario:
    """A named example: assembled problem, canonical walls, hypothesis report."""

    name: str
    params: Dict[str, object]
    problem: Problem
    barriers: BarrierPair
    hypothesis: ScenarioHypothesisReport


def _as_expr(src: Union[str, Expression], allowed: Tuple[str, ...], what: str) -> Expression:
    if isinstance(src, Expression):
        extra = src.variables - set(allowed)
        if extra:
            raise ScenarioValidationError(
                f"{what} may depend on {allowed} only; found {sorted(extra)}"
            )
        return src
    return parse(src, allowed_vars=allowed)


def _check_margins(margins, barriers: BarrierPair, problem: Problem) -> ScenarioHypothesisReport:
    """Minimize each named margin over a period grid plus golden refinement."""
    grid_n = suggest_grid(barriers, problem)
    period = problem.period
    step = period / grid_n
    ts = [k * step for k in range(grid_n)]
    checks = []
    for name, fn in margins:
        values = [fn(t) for t in ts]
        worst_i = min(range(grid_n), key=values.__getitem__)
        worst_t, worst_m = ts[worst_i], values[worst_i]
        if math.isfinite(worst_m):
            x, fx = _golden_min(fn, worst_t - step, worst_t + step, xtol=step * 1e-7)
            if fx < worst_m:
                worst_t, worst_m = x % period, fx
        checks.append(
            HypothesisCheck(
                name=name, satisfied=worst_m > 0.0, worst_margin=worst_m, argmin_t=worst_t
            )
        )
    return ScenarioHypothesisReport(
        checks=tuple(checks),
        grid_size=grid_n,
        passed=all(c.satisfied for c in checks),
    )


def pendulum(
    alpha: float,
    gamma: float,
    f_ext: Union[str, Expression],
    period: float,
) -> Scenario:
    """Forced pendulum near its inverted position, walls one quarter turn out.

    The force is the external drive minus viscous friction plus the gravity
    torque alpha*sin(q); the walls are the constants -pi/2 and pi/2. The
    hypothesis asks the drive alone to stay below alpha at the lower wall and
    above -alpha at the upper wall, at rest, for all t.
    """
    if not (alpha > 0.0):
        raise ScenarioValidationError("alpha must be positive")
    if period <= 0.0:
        raise ScenarioValidationError("period must be positive")
    fe = _as_expr(f_ext, ("t", "q", "p"), "f_ext")
    pieces = [f"({fe.source})"]
    if gamma != 0.0:
        pieces.append(f"- {gamma!r}*p")
    pieces.append(f"+ {alpha!r}*sin(q)")
    force = parse(" ".join(pieces))
    problem = Problem(force=force, period=period)
    barriers = BarrierPair(h1=parse("-pi/2", ("t",)), h2=parse("pi/2", ("t",)), period=period)
    q1, q2 = barriers.values(0.0)

    def lower_margin(t: float) -> float:
        return alpha - fe.evaluate(t=t % period, q=q1, p=0.0)

    def upper_margin(t: float) -> float:
        return fe.evaluate(t=t % period, q=q2, p=0.0) + alpha

    report = _check_margins(
        [("lower_force_bound", lower_margin), ("upper_force_bound", upper_margin)],
        barriers,
        problem,
    )
    return Scenario(
        name="pendulum",
        params={"alpha": alpha, "gamma": gamma, "f_ext": fe.source, "period": period},
        problem=problem,
        barriers=barriers,
        hypothesis=report,
    )


class CurveForce:
    """Force law for a bead on a height profile y(q): drive, friction, slope.

    evaluate(t, q, p) returns f_ext(t, q, p) - gamma*p - alpha*y'(q), with
    y'(q) differentiated exactly from the profile expression at each call.
    Not expressible as a single closed-form text, hence an object.
    """

    def __init__(self, f_ext: Expression, gamma: float, alpha: float, profile: Expression):
        self.f_ext = f_ext
        self.gamma = gamma
        self.alpha = alpha
        self.profile = profile

    def slope(self, q: float) -> float:
        return self.profile.eval_jet2_in("q", q).d1

    def evaluate(self, t: float, q: float, p: float) -> float:
        return (
            self.f_ext.evaluate(t=t, q=q, p=p)
            - self.gamma * p
            - self.alpha * self.slope(q)
        )


def curve_constrained(
    y: Union[str, Expression],
    alpha: float,
    gamma: float,
    f_ext: Union[str, Expression],
    period: float,
    q1: float,
    q2: float,
    profile_grid_n: int = 257,
) -> Scenario:
    """Bead on a positive arch y(q) between q1 < q2 with unit endpoint slopes.

    Validates the arch before building anything: y'(q1) = 1 and y'(q2) = -1
    to within 1e-6, and y > 0 on an interior grid over (q1, q2). The walls
    are the constants q1 and q2; the hypothesis mirrors the pendulum's, with
    the drive compared against alpha at the wall positions at rest.
    """
    if not (q1 < q2):
        raise ScenarioValidationError("q1 < q2 is required")
    if not (alpha > 0.0):
        raise ScenarioValidationError("alpha must be positive")
    if period <= 0.0:
        raise ScenarioValidationError("period must be positive")
    prof = _as_expr(y, ("q",), "y")
    fe = _as_expr(f_ext, ("t", "q", "p"), "f_ext")

    s1 = prof.eval_jet2_in("q", q1).d1
    s2 = prof.eval_jet2_in("q", q2).d1
    if abs(s1 - 1.0) > _PROFILE_SLOPE_TOL:
        raise ScenarioValidationError(
            f"profile slope at q1 must be 1, got {s1!r} (tolerance {_PROFILE_SLOPE_TOL})"
        )
    if abs(s2 + 1.0) > _PROFILE_SLOPE_TOL:
        raise ScenarioValidationError(
            f"profile slope at q2 must be -1, got {s2!r} (tolerance {_PROFILE_SLOPE_TOL})"
        )
    h = (q2 - q1) / (profile_grid_n + 1)
    for i in range(1, profile_grid_n + 1):
        qi = q1 + i * h
        yi = prof.evaluate(q=qi)
        if not (yi > 0.0):
            raise ScenarioValidationError(
                f"profile must be positive strictly between the walls; y({qi!r}) = {yi!r}"
            )

    force = CurveForce(fe, gamma, alpha, prof)
    problem = Problem(force=force, period=period)
    barriers = BarrierPair(
        h1=parse(repr(float(q1)), ("t",)),
        h2=parse(repr(float(q2)), ("t",)),
        period=period,
    )

    def lower_margin(t: float) -> float:
        return alpha - fe.evaluate(t=t % period, q=q1, p=0.0)

    def upper_margin(t: float) -> float:
        return fe.evaluate(t=t % period, q=q2, p=0.0) + alpha

    report = _check_margins(
        [("lower_force_bound", lower_margin), ("upper_force_bound", upper_margin)],
        barriers,
        problem,
    )
    return Scenario(
        name="curve",
        params={
            "y": prof.source,
            "alpha": alpha,
            "gamma": gamma,
            "f_ext": fe.source,
            "period": period,
            "q1": q1,
            "q2": q2,
        },
        problem=problem,
        barriers=barriers,
        hypothesis=report,
    )


def rotating_field(
    f_mag: Union[str, Expression],
    psi: Union[str, Expression],
    gamma: float,
    period: float,
) -> Scenario:
    """A force of magnitude f_mag(t) pointing along the rotating phase psi(t).

    The force on the angle q is f_mag*(cos(q)*sin(psi) - sin(q)*cos(psi)),
    minus viscous friction; the walls ride the field a quarter turn ahead and
    behind the antipode: psi + pi/2 and psi + 3*pi/2. The hypothesis asks the
    field rotation to stay subluminal and the magnitude to dominate the
    rotation's proper acceleration plus the friction bias, pointwise in t.
    """
    if period <= 0.0:
        raise ScenarioValidationError("period must be positive")
    mag = _as_expr(f_mag, ("t",), "f_mag")
    phase = _as_expr(psi, ("t",), "psi")
    src = f"({mag.source})*(cos(q)*sin({phase.source}) - sin(q)*cos({phase.source}))"
    if gamma != 0.0:
        src += f" - {gamma!r}*p"
    force = parse(src)
    problem = Problem(force=force, period=period, topology="circle")
    barriers = BarrierPair(
        h1=parse(f"({phase.source}) + pi/2", ("t",)),
        h2=parse(f"({phase.source}) + 3*pi/2", ("t",)),
        period=period,
    )

    def rotation_margin(t: float) -> float:
        return 1.0 - abs(phase.eval_jet2(t % period).d1)

    def dominance_margin(t: float) -> float:
        jet = phase.eval_jet2(t % period)
        if abs(jet.d1) >= 1.0:
            return -math.inf
        gam2 = (1.0 - jet.d1) * (1.0 + jet.d1)
        return (
            mag.evaluate(t=t % period)
            - abs(jet.d2) * math.pow(gam2, -1.5)
            - abs(gamma * jet.d1)
        )

    report = _check_margins(
        [("subluminal_rotation", rotation_margin), ("force_dominates", dominance_margin)],
        barriers,
        problem,
    )
    return Scenario(
        name="rotating_field",
        params={"f_mag": mag.source, "psi": phase.source, "gamma": gamma, "period": period},
        problem=problem,
        barriers=barriers,
        hypothesis=report,
    )
