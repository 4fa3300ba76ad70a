"""Adaptive integration of the regularized equations of motion.

The stepper is an explicit embedded Runge-Kutta pair of orders 5(4)
(Dormand-Prince coefficients, first-same-as-last), run on the regularized
state (q, u) so the speed limit never produces a singular right-hand side.
Step size is driven by a proportional-integral controller on the embedded
error estimate. Every accepted step carries a quartic interpolant, which
serves three jobs: trajectory sampling between steps, locating wall-crossing
times by bisection, and the in-band test of candidate periodic orbits.

Wall crossings are recorded as events and integration continues; only the
luminal guard (|p| reaching 1 - guard) halts a run early. All tolerances and
guards live in IntegratorOptions.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .dynamics import Problem, velocity_to_momentum
from .errors import (
    ExprEvalError,
    IntegrationError,
    LuminalGuardError,
    LuminalVelocityError,
    MaxStepsExceededError,
)
from .expr import Expression

__all__ = [
    "IntegratorOptions",
    "TrajectoryEvent",
    "Trajectory",
    "integrate",
    "period_map_step",
]

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-order minus embedded fourth-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# quartic interpolant weights
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0

_SAFETY = 0.9
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0

_EVENT_T_TOL = 1e-12

EVENT_CROSSED_H1 = "crossed_h1"
EVENT_CROSSED_H2 = "crossed_h2"
EVENT_LUMINAL = "luminal_guard"
EVENT_COMPLETED = "completed"


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and guards for the adaptive stepper.

    max_step of None means one fiftieth of the problem period. luminal_guard
    is the epsilon in the halt condition |p| >= 1 - epsilon and in the
    precondition |p0| < 1 - epsilon.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: Optional[float] = None
    luminal_guard: float = 1e-6
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and math.isfinite(self.rel_tol)):
            raise ValueError("rel_tol must be positive and finite")
        if not (self.abs_tol > 0.0 and math.isfinite(self.abs_tol)):
            raise ValueError("abs_tol must be positive and finite")
        if self.max_step is not None and not (self.max_step > 0.0):
            raise ValueError("max_step must be positive")
        if not (0.0 < self.luminal_guard < 0.1):
            raise ValueError("luminal_guard must lie in (0, 0.1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    def tightened(self, factor: float = 10.0) -> "IntegratorOptions":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


@dataclass(frozen=True)
class TrajectoryEvent:
    t: float
    kind: str


class _DenseSegment:
    """Quartic interpolant over one accepted step [t0, t0 + h] (h may be negative)."""

    __slots__ = ("t0", "h", "rq", "ru")

    def __init__(self, t0: float, h: float, rq: Tuple[float, ...], ru: Tuple[float, ...]):
        self.t0 = t0
        self.h = h
        self.rq = rq
        self.ru = ru

    def eval(self, t: float) -> Tuple[float, float]:
        theta = (t - self.t0) / self.h
        om = 1.0 - theta
        r = self.rq
        q = r[0] + theta * (r[1] + om * (r[2] + theta * (r[3] + om * r[4])))
        r = self.ru
        u = r[0] + theta * (r[1] + om * (r[2] + theta * (r[3] + om * r[4])))
        return q, u


class Trajectory:
    """An integration result: samples at accepted steps, events, dense output.

    samples holds (t, q, p, u) rows, strictly monotone in t along the
    direction of integration, with |p| < 1 at every row. events is
    time-ordered; a final 'completed' event marks a run that reached its
    requested end time (a 'luminal_guard' run ends early without one).
    """

    def __init__(self, direction: float):
        self.samples: List[Tuple[float, float, float, float]] = []
        self.events: List[TrajectoryEvent] = []
        self._segments: List[_DenseSegment] = []
        self._starts: List[float] = []
        self._direction = direction

    # -- construction (internal) --

    def _add_sample(self, t: float, q: float, u: float) -> None:
        p = u / math.sqrt(1.0 + u * u)
        self.samples.append((t, q, p, u))

    def _add_segment(self, seg: _DenseSegment) -> None:
        self._segments.append(seg)
        self._starts.append(self._direction * seg.t0)

    # -- queries --

    @property
    def completed(self) -> bool:
        return bool(self.events) and self.events[-1].kind == EVENT_COMPLETED

    @property
    def t_final(self) -> float:
        return self.samples[-1][0]

    @property
    def final_state(self) -> Tuple[float, float]:
        _, q, p, _ = self.samples[-1]
        return (q, p)

    def state_at(self, t: float) -> Tuple[float, float, float]:
        """(q, p, u) at any time covered by the trajectory, via dense output."""
        if not self._segments:
            raise IntegrationError("trajectory holds no dense segments")
        key = self._direction * t
        lo = self._direction * self._segments[0].t0
        last = self._segments[-1]
        hi = self._direction * (last.t0 + last.h)
        if key < lo - 1e-12 or key > hi + 1e-12:
            raise ValueError(f"t = {t!r} lies outside the integrated range")
        i = bisect_right(self._starts, key) - 1
        if i < 0:
            i = 0
        q, u = self._segments[i].eval(t)
        return (q, u / math.sqrt(1.0 + u * u), u)

    def csv_rows(self) -> Sequence[Tuple[float, float, float, float]]:
        return tuple(self.samples)


def _initial_step(f, t0, q0, u0, dq0, du0, direction, span, max_step, rel_tol, abs_tol):
    scq = abs_tol + rel_tol * abs(q0)
    scu = abs_tol + rel_tol * abs(u0)
    d0 = math.sqrt(0.5 * ((q0 / scq) ** 2 + (u0 / scu) ** 2))
    d1 = math.sqrt(0.5 * ((dq0 / scq) ** 2 + (du0 / scu) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span, max_step)
    q1 = q0 + h0 * direction * dq0
    u1 = u0 + h0 * direction * du0
    dq1, du1 = f(t0 + h0 * direction, q1, u1)
    d2 = math.sqrt(0.5 * (((dq1 - dq0) / scq) ** 2 + ((du1 - du0) / scu) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, span, max_step)


def _bisect_crossing(seg: _DenseSegment, wall_value, ta: float, tb: float, ga: float) -> float:
    """Root of q(t) - wall(t) in [ta, tb] given a sign change, to 1e-12 in t."""
    if ga == 0.0:
        return ta
    neg_a = ga < 0.0
    while abs(tb - ta) > _EVENT_T_TOL:
        tm = 0.5 * (ta + tb)
        if tm == ta or tm == tb:
            break
        q, _ = seg.eval(tm)
        gm = q - wall_value(tm)
        if gm == 0.0:
            return tm
        if (gm < 0.0) == neg_a:
            ta = tm
        else:
            tb = tm
    return 0.5 * (ta + tb)


def integrate(
    t0: float,
    q0: float,
    p0: float,
    t_end: float,
    problem: Problem,
    options: Optional[IntegratorOptions] = None,
    geometry=None,
) -> Trajectory:
    """Integrate from (t0, q0, p0) toward t_end in regularized coordinates.

    Requires |p0| < 1 - luminal_guard and t_end != t0 (backward runs are
    allowed). With a geometry, wall crossings q = h1(t) and q = h2(t) are
    located by bisection on the dense output and recorded as events without
    halting. The run halts early, with a 'luminal_guard' event and no
    'completed' event, if |p| reaches 1 - luminal_guard at a step end.

    Raises MaxStepsExceededError when the step budget runs out and
    IntegrationError when the force law fails to evaluate.
    """
    opts = options if options is not None else IntegratorOptions()
    eps = opts.luminal_guard
    if abs(p0) >= 1.0 - eps:
        raise LuminalVelocityError(
            f"|p0| = {abs(p0)!r} violates the precondition |p0| < 1 - {eps!r}"
        )
    if not (math.isfinite(t0) and math.isfinite(t_end)):
        raise ValueError("t0 and t_end must be finite")
    if t_end == t0:
        raise ValueError("t_end must differ from t0")

    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    max_step = opts.max_step if opts.max_step is not None else problem.period / 50.0
    rel_tol, abs_tol = opts.rel_tol, opts.abs_tol
    u_guard = (1.0 - eps) / math.sqrt(eps * (2.0 - eps))
    period = problem.period

    force = problem.force
    fast = force._fn if isinstance(force, Expression) else None

    def f(t: float, q: float, u: float) -> Tuple[float, float]:
        p = u / math.sqrt(1.0 + u * u)
        if fast is not None:
            try:
                du = fast(t % period, q, p)
            except (ArithmeticError, ValueError):
                du = problem.force_value(t, q, p)  # re-run for a named error
            if not math.isfinite(du):
                du = problem.force_value(t, q, p)
        else:
            du = problem.force_value(t, q, p)
        return p, du

    walls = None
    if geometry is not None:
        barriers = geometry.barriers
        walls = (
            (EVENT_CROSSED_H1, lambda t: barriers.values(t)[0], +1.0),
            (EVENT_CROSSED_H2, lambda t: barriers.values(t)[1], -1.0),
        )

    traj = Trajectory(direction)
    t, q, u = t0, q0, velocity_to_momentum(p0)
    traj._add_sample(t, q, u)

    try:
        kq1, ku1 = f(t, q, u)
        h = _initial_step(f, t, q, u, kq1, ku1, direction, span, max_step, rel_tol, abs_tol)
    except ExprEvalError as exc:
        raise IntegrationError(f"force evaluation failed at the initial state: {exc}") from exc

    # signed gap to each wall at the start (for crossing detection)
    gaps = None
    if walls is not None:
        gaps = [sign * (q - wall(t)) for (_, wall, sign) in walls]
    err_prev = 1e-4
    just_rejected = False
    steps = 0

    while True:
        remaining = abs(t_end - t)
        if remaining <= 1e-14 * max(1.0, abs(t_end)):
            traj.events.append(TrajectoryEvent(t_end, EVENT_COMPLETED))
            break
        if steps >= opts.max_steps:
            raise MaxStepsExceededError(
                f"exceeded {opts.max_steps} step attempts at t = {t!r} "
                f"(target {t_end!r}); tighten max_step or raise max_steps"
            )
        steps += 1
        h = min(h, remaining)
        hs = h * direction

        try:
            kq2, ku2 = f(t + _C2 * hs, q + hs * (_A21 * kq1), u + hs * (_A21 * ku1))
            kq3, ku3 = f(
                t + _C3 * hs,
                q + hs * (_A31 * kq1 + _A32 * kq2),
                u + hs * (_A31 * ku1 + _A32 * ku2),
            )
            kq4, ku4 = f(
                t + _C4 * hs,
                q + hs * (_A41 * kq1 + _A42 * kq2 + _A43 * kq3),
                u + hs * (_A41 * ku1 + _A42 * ku2 + _A43 * ku3),
            )
            kq5, ku5 = f(
                t + _C5 * hs,
                q + hs * (_A51 * kq1 + _A52 * kq2 + _A53 * kq3 + _A54 * kq4),
                u + hs * (_A51 * ku1 + _A52 * ku2 + _A53 * ku3 + _A54 * ku4),
            )
            kq6, ku6 = f(
                t + hs,
                q + hs * (_A61 * kq1 + _A62 * kq2 + _A63 * kq3 + _A64 * kq4 + _A65 * kq5),
                u + hs * (_A61 * ku1 + _A62 * ku2 + _A63 * ku3 + _A64 * ku4 + _A65 * ku5),
            )
            q_new = q + hs * (_B1 * kq1 + _B3 * kq3 + _B4 * kq4 + _B5 * kq5 + _B6 * kq6)
            u_new = u + hs * (_B1 * ku1 + _B3 * ku3 + _B4 * ku4 + _B5 * ku5 + _B6 * ku6)
            t_new = t + hs
            kq7, ku7 = f(t_new, q_new, u_new)
        except ExprEvalError as exc:
            raise IntegrationError(f"force evaluation failed near t = {t!r}: {exc}") from exc

        eq = hs * (_E1 * kq1 + _E3 * kq3 + _E4 * kq4 + _E5 * kq5 + _E6 * kq6 + _E7 * kq7)
        eu = hs * (_E1 * ku1 + _E3 * ku3 + _E4 * ku4 + _E5 * ku5 + _E6 * ku6 + _E7 * ku7)
        scq = abs_tol + rel_tol * max(abs(q), abs(q_new))
        scu = abs_tol + rel_tol * max(abs(u), abs(u_new))
        err = math.sqrt(0.5 * ((eq / scq) ** 2 + (eu / scu) ** 2))

        if err > 1.0:
            h *= max(0.1, _SAFETY * err ** (-0.2))
            just_rejected = True
            continue

        # accepted: build the quartic interpolant (Hairer's contd5 form)
        dq, du = q_new - q, u_new - u
        bq = hs * kq1 - dq
        bu = hs * ku1 - du
        rq = (
            q,
            dq,
            bq,
            dq - hs * kq7 - bq,
            hs * (_D1 * kq1 + _D3 * kq3 + _D4 * kq4 + _D5 * kq5 + _D6 * kq6 + _D7 * kq7),
        )
        ru = (
            u,
            du,
            bu,
            du - hs * ku7 - bu,
            hs * (_D1 * ku1 + _D3 * ku3 + _D4 * ku4 + _D5 * ku5 + _D6 * ku6 + _D7 * ku7),
        )
        seg = _DenseSegment(t, hs, rq, ru)
        traj._add_segment(seg)

        if walls is not None:
            step_events = []
            for widx, (kind, wall, sign) in enumerate(walls):
                g_new = sign * (q_new - wall(t_new))
                g_old = gaps[widx]
                if (g_old < 0.0) != (g_new < 0.0):
                    t_event = _bisect_crossing(seg, wall, t, t_new, q - wall(t))
                    step_events.append(TrajectoryEvent(t_event, kind))
                gaps[widx] = g_new
            if step_events:
                step_events.sort(key=lambda ev: direction * ev.t)
                traj.events.extend(step_events)

        t, q, u = t_new, q_new, u_new
        kq1, ku1 = kq7, ku7
        traj._add_sample(t, q, u)

        if abs(u) >= u_guard:
            traj.events.append(TrajectoryEvent(t, EVENT_LUMINAL))
            break

        if err == 0.0:
            fac = _FAC_MAX
        else:
            fac = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, fac))
        if just_rejected:
            fac = min(fac, 1.0)
            just_rejected = False
        h = min(h * fac, max_step)
        err_prev = max(err, 1e-4)

    return traj


def period_map_step(
    x0: Tuple[float, float],
    problem: Problem,
    options: Optional[IntegratorOptions] = None,
    geometry=None,
) -> Tuple[Tuple[float, float], bool]:
    """Advance (q, p) by one forcing period from t = 0; the stroboscopic map.

    Returns the state at t = T and a flag that is True iff no wall crossing
    and no luminal-guard event fired along the way (with no geometry, wall
    crossings are not tracked and only the guard can clear the flag). Raises
    LuminalGuardError if the guard halts the run before T, since then there
    is no state at T to return.
    """
    q0, p0 = x0
    traj = integrate(0.0, q0, p0, problem.period, problem, options, geometry)
    if not traj.completed:
        raise LuminalGuardError(
            f"period map aborted by the luminal guard at t = {traj.t_final!r}",
            trajectory=traj,
        )
    flagged = (EVENT_CROSSED_H1, EVENT_CROSSED_H2, EVENT_LUMINAL)
    stayed = not any(ev.kind in flagged for ev in traj.events)
    return traj.final_state, stayed
