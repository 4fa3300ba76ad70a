"""Equations of motion for a relativistically forced particle on a line.

The model is a unit-rest-mass particle whose momentum responds to a bounded,
time-periodic force law f(t, q, p):

    dq/dt = p
    dp/dt = (1 - p^2)^(3/2) * f(t, q, p)

with |p| < 1 (units where the speed limit is 1). The factor (1 - p^2)^(3/2)
comes from differentiating the kinetic term p / sqrt(1 - p^2); it pins the
lines p = +1 and p = -1 as invariant sets: the momentum update vanishes there
no matter how large the force.

Near |p| = 1 the velocity form is stiff, so integration uses the regularized
momentum u = p / sqrt(1 - p^2) (inverse p = u / sqrt(1 + u^2)), in which the
system becomes

    dq/dt = p(u)
    du/dt = f(t, q, p(u))

with no singular factor at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

from .errors import LuminalVelocityError
from .expr import Expression

__all__ = [
    "State",
    "Problem",
    "velocity_to_momentum",
    "momentum_to_velocity",
    "rhs",
    "rhs_regularized",
]

Topology = str  # "line" or "circle"


@dataclass(frozen=True)
class State:
    """A phase point (t, q, p) with subluminal-or-luminal velocity |p| <= 1."""

    t: float
    q: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.q) and math.isfinite(self.p)):
            raise ValueError("state components must be finite")
        if abs(self.p) > 1.0:
            raise LuminalVelocityError(f"|p| = {abs(self.p)!r} exceeds the speed limit 1")


@dataclass(frozen=True)
class Problem:
    """A forced-particle problem: force law, forcing period, and topology.

    force may be an Expression in (t, q, p) or any object exposing
    evaluate(t=..., q=..., p=...) -> float. The time argument is always
    reduced modulo the period before the force sees it, so the force law is
    periodic by construction even when its text is not literally periodic.

    topology records whether q lives on the line or on a circle of
    circumference 2*pi. Certification and block geometry always work in the
    universal cover; the flag only affects how fixed points are deduplicated.
    """

    force: object
    period: float
    topology: Topology = "line"

    def __post_init__(self):
        if not (isinstance(self.period, (int, float)) and math.isfinite(self.period)):
            raise ValueError("period must be a finite number")
        if self.period <= 0.0:
            raise ValueError("period must be positive")
        if self.topology not in ("line", "circle"):
            raise ValueError(f"topology must be 'line' or 'circle', got {self.topology!r}")
        if not hasattr(self.force, "evaluate"):
            raise TypeError("force must expose evaluate(t=, q=, p=)")

    def force_value(self, t: float, q: float, p: float) -> float:
        """Force at (t mod period, q, p)."""
        return self.force.evaluate(t=t % self.period, q=q, p=p)


def velocity_to_momentum(p: float) -> float:
    """Regularized momentum u = p / sqrt(1 - p^2). Requires |p| < 1."""
    if abs(p) >= 1.0:
        raise LuminalVelocityError(f"luminal velocity: |p| = {abs(p)!r} >= 1")
    return p / math.sqrt((1.0 - p) * (1.0 + p))


def momentum_to_velocity(u: float) -> float:
    """Velocity p = u / sqrt(1 + u^2) in (-1, 1). Requires finite u."""
    if not math.isfinite(u):
        raise ValueError(f"momentum must be finite, got {u!r}")
    return u / math.sqrt(1.0 + u * u)


def rhs(state: State, problem: Problem) -> Tuple[float, float]:
    """Velocity-form vector field (dq/dt, dp/dt) at a state with |p| <= 1.

    At |p| = 1 exactly the momentum derivative is 0 (the luminal lines are
    invariant); State itself rejects |p| > 1.
    """
    p = state.p
    if p == 1.0 or p == -1.0:
        return (p, 0.0)
    factor = math.pow(1.0 - p * p, 1.5)
    return (p, factor * problem.force_value(state.t, state.q, p))


def rhs_regularized(t: float, q: float, u: float, problem: Problem) -> Tuple[float, float]:
    """Regularized vector field (dq/dt, du/dt) in the coordinates (q, u)."""
    p = momentum_to_velocity(u)
    return (p, problem.force_value(t, q, p))
