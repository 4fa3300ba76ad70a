"""Moving-band certificates: two time-periodic walls that trap a periodic orbit.

A band is a pair of C^2 walls h1(t) < h2(t), both T-periodic with subluminal
slopes |dh/dt| < 1. The wall condition compares the forced acceleration with
the wall's own curvature through the residual

    r(t, side) = (1 - hdot^2)^(3/2) * f(t, h, hdot) - hddot.

If r < 0 on the lower wall and r > 0 on the upper wall for all t, every
trajectory touching a wall tangentially curves out of the band, the walls are
one-way, and a periodic solution inside the band is guaranteed. The margin
convention used everywhere: positive margin means the strict inequality holds
(-r on the lower wall, +r on the upper wall).

Verification samples a uniform time grid and can refine each worst point by
golden-section minimization. This is a sampled check, not a computer-assisted
proof: it certifies the hypotheses up to grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .dynamics import Problem
from .errors import BarrierValidationError, SlopeViolationError
from .expr import Expression, Jet2

__all__ = [
    "PERIODICITY_TOL",
    "BarrierPair",
    "HypothesisCheck",
    "CertificateReport",
    "condition_residual",
    "verify_certificate",
    "suggest_grid",
]

PERIODICITY_TOL = 1e-9

_HYPOTHESES = ("ordering", "slope_lower", "slope_upper", "condition_lower", "condition_upper")


@dataclass(frozen=True)
class BarrierPair:
    """Two candidate walls h1, h2 as t-only expressions, with the shared period.

    Construction validates structure only (variables, smoothness, periodicity
    of value and first two derivatives at the period seam). The ordering,
    slope, and wall conditions are the certificate's job.
    """

    h1: Expression
    h2: Expression
    period: float

    def __post_init__(self):
        if not (isinstance(self.period, (int, float)) and math.isfinite(self.period)):
            raise BarrierValidationError("period must be a finite number")
        if self.period <= 0.0:
            raise BarrierValidationError("period must be positive")
        for name, h in (("h1", self.h1), ("h2", self.h2)):
            if not isinstance(h, Expression):
                raise BarrierValidationError(f"{name} must be a parsed Expression")
            extra = h.variables - {"t"}
            if extra:
                raise BarrierValidationError(
                    f"{name} may depend on t only; found {sorted(extra)}"
                )
            if h.contains_abs():
                raise BarrierValidationError(
                    f"{name} uses abs, which is not twice differentiable"
                )
            lo = h.eval_jet2(0.0)
            hi = h.eval_jet2(self.period)
            for label, a, b in (
                ("value", lo.value, hi.value),
                ("slope", lo.d1, hi.d1),
                ("curvature", lo.d2, hi.d2),
            ):
                if abs(a - b) > PERIODICITY_TOL:
                    raise BarrierValidationError(
                        f"{name} is not {self.period!r}-periodic: {label} differs by "
                        f"{abs(a - b):.3e} across the period seam (tolerance {PERIODICITY_TOL})"
                    )

    def jets(self, side: str, t: float) -> Jet2:
        """(h, dh/dt, d2h/dt2) on one wall at t, reduced modulo the period."""
        h = self.h1 if side == "lower" else self.h2
        return h.eval_jet2(t % self.period)

    def values(self, t: float) -> Tuple[float, float]:
        tr = t % self.period
        return (self.h1.evaluate(t=tr), self.h2.evaluate(t=tr))


@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome for one certificate hypothesis. satisfied iff worst_margin > 0."""

    name: str
    satisfied: bool
    worst_margin: float
    argmin_t: float


@dataclass(frozen=True)
class CertificateReport:
    hypotheses: Tuple[HypothesisCheck, ...]
    grid_size: int
    refined: bool
    passed: bool

    def check(self, name: str) -> HypothesisCheck:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)


def condition_residual(t: float, side: str, barriers: BarrierPair, problem: Problem) -> float:
    """Wall residual (1 - hdot^2)^(3/2) * f(t, h, hdot) - hddot at time t.

    Raises SlopeViolationError when |hdot| >= 1 there (the residual is not
    defined past the speed limit; this is reported, never clamped).
    """
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    jet = barriers.jets(side, t)
    if abs(jet.d1) >= 1.0:
        raise SlopeViolationError(side, t)
    factor = math.pow((1.0 - jet.d1) * (1.0 + jet.d1), 1.5)
    return factor * problem.force_value(t, jet.value, jet.d1) - jet.d2


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fn: Callable[[float], float], a: float, b: float, xtol: float):
    """Golden-section minimum of fn on [a, b]; returns (x, fn(x))."""
    best_x, best_f = a, fn(a)
    fb_end = fn(b)
    if fb_end < best_f:
        best_x, best_f = b, fb_end
    width = b - a
    c = b - _INVPHI * width
    d = a + _INVPHI * width
    fc, fd = fn(c), fn(d)
    while width > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            width = b - a
            c = b - _INVPHI * width
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            width = b - a
            d = a + _INVPHI * width
            fd = fn(d)
    for x, f in ((c, fc), (d, fd)):
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


def _margin_functions(barriers: BarrierPair, problem: Problem):
    """Margin-of-validity functions for the five hypotheses, positive = holds.

    Where a slope violation makes a wall condition unevaluable the condition
    margin is -inf (maximally violated), while the slope margin itself stays
    finite and carries the diagnosis.
    """

    def ordering(t: float) -> float:
        lo, hi = barriers.values(t)
        return hi - lo

    def slope(side: str):
        def margin(t: float) -> float:
            return 1.0 - abs(barriers.jets(side, t).d1)

        return margin

    def condition(side: str, sign: float):
        def margin(t: float) -> float:
            try:
                return sign * condition_residual(t, side, barriers, problem)
            except SlopeViolationError:
                return -math.inf

        return margin

    return {
        "ordering": ordering,
        "slope_lower": slope("lower"),
        "slope_upper": slope("upper"),
        "condition_lower": condition("lower", -1.0),
        "condition_upper": condition("upper", +1.0),
    }


def verify_certificate(
    barriers: BarrierPair,
    problem: Problem,
    grid_n: Optional[int] = None,
    refine: bool = True,
) -> CertificateReport:
    """Check all five band hypotheses on a uniform grid over one period.

    grid_n defaults to suggest_grid(barriers, problem) and must be at least
    16. With refine, each hypothesis' worst grid point is polished by
    golden-section minimization over the bracket formed by its grid
    neighbors; the reported margin is never worse than the grid margin.
    """
    if abs(barriers.period - problem.period) > 0.0:
        raise BarrierValidationError(
            f"barrier period {barriers.period!r} differs from problem period {problem.period!r}"
        )
    if grid_n is None:
        grid_n = suggest_grid(barriers, problem)
    if grid_n < 16:
        raise ValueError(f"grid_n must be at least 16, got {grid_n}")

    period = problem.period
    step = period / grid_n
    ts = [k * step for k in range(grid_n)]
    margins = _margin_functions(barriers, problem)

    checks = []
    for name in _HYPOTHESES:
        fn = margins[name]
        values = [fn(t) for t in ts]
        worst_i = min(range(grid_n), key=values.__getitem__)
        worst_t, worst_m = ts[worst_i], values[worst_i]
        if refine and math.isfinite(worst_m):
            a = worst_t - step
            b = worst_t + step
            x, fx = _golden_min(fn, a, b, xtol=step * 1e-7)
            if fx < worst_m:
                worst_t, worst_m = x % period, fx
        checks.append(
            HypothesisCheck(
                name=name,
                satisfied=worst_m > 0.0,
                worst_margin=worst_m,
                argmin_t=worst_t,
            )
        )
    return CertificateReport(
        hypotheses=tuple(checks),
        grid_size=grid_n,
        refined=bool(refine),
        passed=all(c.satisfied for c in checks),
    )


def _oscillation_count(samples) -> float:
    """Total variation divided by one full swing (4 * half-amplitude)."""
    lo = min(samples)
    hi = max(samples)
    amp = 0.5 * (hi - lo)
    scale = max(1.0, abs(hi), abs(lo))
    if amp <= 1e-12 * scale:
        return 0.0
    tv = 0.0
    prev = samples[0]
    for x in samples[1:]:
        tv += abs(x - prev)
        prev = x
    return tv / (4.0 * amp)


def suggest_grid(barriers: BarrierPair, problem: Problem, probe_n: int = 2048) -> int:
    """Grid size scaled to the fastest sampled oscillation of the walls and force.

    Probes both walls and the force along the band midline at rest, estimates
    an oscillation count from total variation, and allots 128 points per
    oscillation with a floor of 256.
    """
    period = barriers.period
    step = period / probe_n
    h1s, h2s, fs = [], [], []
    for k in range(probe_n):
        t = k * step
        lo, hi = barriers.values(t)
        h1s.append(lo)
        h2s.append(hi)
        fs.append(problem.force_value(t, 0.5 * (lo + hi), 0.0))
    worst = max(_oscillation_count(sig) for sig in (h1s, h2s, fs))
    return max(256, math.ceil(128.0 * worst))
