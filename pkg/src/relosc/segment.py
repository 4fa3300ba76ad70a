"""Flow-block geometry of a certified band and its exit-set topology.

Over one forcing period the certified band sweeps out the block

    W = {(t, q, p) : 0 <= t <= T, h1(t) <= q <= h2(t), |p| <= 1},

whose fiber at each time is a rectangle in the (q, p) plane. Under the wall
conditions the only points through which trajectories leave the block
immediately, from both sides in time, form two arcs on each fiber:

    lower wall q = h1(t) with p in [-1, dh1/dt],
    upper wall q = h2(t) with p in [dh2/dt, 1].

Tangent boundary points (p exactly equal to the wall slope) are settled by
the sign of the quadratic term of q(t) - h(t) along the flow, which is the
same residual the certificate bounds away from zero.

The block is a product: an explicit fiber-preserving homeomorphism carries
the time-0 fiber onto the time-t fiber (affine in q, piecewise linear in p
with the break riding the wall slope), maps exit arcs onto exit arcs, and is
the identity at t = 0 and t = T. The induced return identification is
therefore the identity map, and the fixed-point index the block forces on
the period map is

    chi(fiber) - chi(exit arcs) = 1 - 2 = -1,

computed here from the piece counts rather than hard-coded.
"""

from __future__ import annotations

import enum
import math
from typing import Optional, Tuple

from .barrier import BarrierPair, CertificateReport, condition_residual, verify_certificate
from .dynamics import Problem
from .errors import GeometryError, UndeterminedTangencyError

__all__ = [
    "BoundaryClass",
    "SegmentGeometry",
    "classify_point",
    "tangency_residual",
    "segment_map",
    "segment_map_inverse",
    "monodromy",
    "fixed_point_index",
    "fiber_euler_characteristics",
]


class BoundaryClass(enum.Enum):
    """Where a phase point sits relative to the moving band at a given time."""

    INTERIOR = "interior"
    ESSENTIAL_EXIT = "essential_exit"
    ENTRY = "entry"
    FACE_P_PLUS = "face_p_plus"
    FACE_P_MINUS = "face_p_minus"
    OUTSIDE = "outside"


class SegmentGeometry:
    """A certified band, ready for boundary classification and fiber transport.

    The constructor verifies the certificate (or accepts a precomputed
    report) and rejects a failing one; pass allow_failed=True only to carry
    out an explicitly forced, non-conforming search.
    """

    def __init__(
        self,
        barriers: BarrierPair,
        problem: Problem,
        report: Optional[CertificateReport] = None,
        grid_n: Optional[int] = None,
        refine: bool = True,
        allow_failed: bool = False,
    ):
        if report is None:
            report = verify_certificate(barriers, problem, grid_n=grid_n, refine=refine)
        if not report.passed and not allow_failed:
            failing = [c.name for c in report.hypotheses if not c.satisfied]
            raise GeometryError(
                "certificate failed; cannot build the block geometry "
                f"(failing hypotheses: {', '.join(failing)})"
            )
        self.barriers = barriers
        self.problem = problem
        self.report = report
        self.certified = report.passed

    @property
    def period(self) -> float:
        return self.problem.period

    def wall_jets(self, t: float):
        return self.barriers.jets("lower", t), self.barriers.jets("upper", t)


def tangency_residual(t0: float, side: str, geometry: SegmentGeometry) -> float:
    """Quadratic coefficient of q(t) - h(t) for a trajectory tangent to a wall.

    For a trajectory meeting wall h at time t0 with p = dh/dt, the gap
    q(t) - h(t) grows like (residual / 2) * (t - t0)^2, so the sign tells
    which side of the wall the trajectory occupies on both sides of t0.
    """
    return condition_residual(t0, side, geometry.barriers, geometry.problem)


def classify_point(
    t: float,
    q: float,
    p: float,
    geometry: SegmentGeometry,
    boundary_tol: float = 0.0,
) -> BoundaryClass:
    """Classify (q, p) at time t relative to the block.

    Classification is exhaustive and mutually exclusive: outside, interior,
    one of the two luminal faces, an essential-exit point, or an entry
    point. Wall points are split by comparing p with the wall slope; exact
    tangencies are settled by the sign of tangency_residual, and a zero
    residual raises UndeterminedTangencyError rather than guessing.
    boundary_tol widens the comparisons for points computed in floating
    point slightly off the boundary.
    """
    if not (0.0 <= t <= geometry.period):
        raise GeometryError(
            f"classification time t = {t!r} outside [0, {geometry.period!r}]"
        )
    lo, hi = geometry.wall_jets(t)
    tol = boundary_tol
    if q < lo.value - tol or q > hi.value + tol or abs(p) > 1.0 + tol:
        return BoundaryClass.OUTSIDE

    on_lower = abs(q - lo.value) <= tol
    on_upper = abs(q - hi.value) <= tol
    if on_lower:
        if abs(p - lo.d1) <= tol:
            residual = tangency_residual(t, "lower", geometry)
            if residual == 0.0:
                raise UndeterminedTangencyError("lower", t)
            return BoundaryClass.ESSENTIAL_EXIT if residual < 0.0 else BoundaryClass.ENTRY
        return BoundaryClass.ESSENTIAL_EXIT if p < lo.d1 else BoundaryClass.ENTRY
    if on_upper:
        if abs(p - hi.d1) <= tol:
            residual = tangency_residual(t, "upper", geometry)
            if residual == 0.0:
                raise UndeterminedTangencyError("upper", t)
            return BoundaryClass.ESSENTIAL_EXIT if residual > 0.0 else BoundaryClass.ENTRY
        return BoundaryClass.ESSENTIAL_EXIT if p > hi.d1 else BoundaryClass.ENTRY
    if abs(p - 1.0) <= tol:
        return BoundaryClass.FACE_P_PLUS
    if abs(p + 1.0) <= tol:
        return BoundaryClass.FACE_P_MINUS
    return BoundaryClass.INTERIOR


def _fiber_line(slope0: float, slope_t: float, p: float) -> float:
    """Piecewise-linear fiber map matching endpoints -1, slope, +1.

    Carries [-1, slope0] affinely onto [-1, slope_t] and (slope0, 1]
    affinely onto (slope_t, 1]; continuous and strictly increasing while
    both slopes stay inside (-1, 1).
    """
    if p <= slope0:
        return ((slope_t + 1.0) / (slope0 + 1.0)) * p + (slope_t - slope0) / (slope0 + 1.0)
    return ((1.0 - slope_t) / (1.0 - slope0)) * p + (slope_t - slope0) / (1.0 - slope0)


def _check_in_fiber(geometry: SegmentGeometry, q0: float, p0: float) -> None:
    if classify_point(0.0, q0, p0, geometry) is BoundaryClass.OUTSIDE:
        raise GeometryError(
            f"(q, p) = ({q0!r}, {p0!r}) lies outside the time-0 fiber of the block"
        )


def segment_map(
    t: float, q0: float, p0: float, geometry: SegmentGeometry
) -> Tuple[float, float]:
    """Transport a time-0 fiber point to the time-t fiber.

    Affine in q between the walls; in p, a convex blend (weighted by the
    q position between the walls) of the two piecewise-linear fiber maps
    whose breaks follow the wall slopes. At t = 0 this is the identity, and
    exit arcs land on exit arcs.
    """
    if not (0.0 <= t <= geometry.period):
        raise GeometryError(f"transport time t = {t!r} outside [0, {geometry.period!r}]")
    _check_in_fiber(geometry, q0, p0)
    lo0, hi0 = geometry.wall_jets(0.0)
    lot, hit = geometry.wall_jets(t)

    q_t = (lot.value - hit.value) / (lo0.value - hi0.value) * (q0 - lo0.value) + lot.value
    w_hi = (q0 - lo0.value) / (hi0.value - lo0.value)
    w_lo = (hi0.value - q0) / (hi0.value - lo0.value)
    p_t = _fiber_line(lo0.d1, lot.d1, p0) * w_lo + _fiber_line(hi0.d1, hit.d1, p0) * w_hi
    return (q_t, p_t)


def segment_map_inverse(
    t: float, q: float, p: float, geometry: SegmentGeometry
) -> Tuple[float, float]:
    """Inverse transport: a time-t fiber point back to the time-0 fiber."""
    if not (0.0 <= t <= geometry.period):
        raise GeometryError(f"transport time t = {t!r} outside [0, {geometry.period!r}]")
    lo0, hi0 = geometry.wall_jets(0.0)
    lot, hit = geometry.wall_jets(t)

    q0 = (q - lot.value) * (lo0.value - hi0.value) / (lot.value - hit.value) + lo0.value
    w_hi = (q0 - lo0.value) / (hi0.value - lo0.value)
    w_lo = (hi0.value - q0) / (hi0.value - lo0.value)

    def blended(p0: float) -> float:
        return _fiber_line(lo0.d1, lot.d1, p0) * w_lo + _fiber_line(hi0.d1, hit.d1, p0) * w_hi

    # the blend is strictly increasing and piecewise linear with breaks at
    # the two time-0 wall slopes; locate the containing piece and invert it
    knots = sorted({-1.0, lo0.d1, hi0.d1, 1.0})
    images = [blended(k) for k in knots]
    if p < images[0] - 1e-9 or p > images[-1] + 1e-9:
        raise GeometryError(f"p = {p!r} lies outside the time-t fiber image")
    p_clamped = min(max(p, images[0]), images[-1])
    for j in range(len(knots) - 1):
        if p_clamped <= images[j + 1] or j == len(knots) - 2:
            lo_k, hi_k = knots[j], knots[j + 1]
            lo_v, hi_v = images[j], images[j + 1]
            if hi_v == lo_v:
                return (q0, lo_k)
            frac = (p_clamped - lo_v) / (hi_v - lo_v)
            return (q0, lo_k + frac * (hi_k - lo_k))
    raise AssertionError("unreachable")


def monodromy(q: float, p: float, geometry: SegmentGeometry) -> Tuple[float, float]:
    """Return identification of the block: transport to t = T after pulling
    back through the (identity) time-0 chart. By wall periodicity this is the
    identity map up to rounding."""
    _check_in_fiber(geometry, q, p)
    q0, p0 = segment_map_inverse(0.0, q, p, geometry)
    return segment_map(geometry.period, q0, p0, geometry)


def fiber_euler_characteristics(geometry: SegmentGeometry) -> Tuple[int, int]:
    """(chi of the time-0 fiber, chi of its essential-exit set), by piece count.

    The fiber is one contractible rectangle. Each wall contributes one exit
    arc when its p-interval is nonempty; the arcs are disjoint whenever the
    walls are ordered. Every piece is contractible, so chi counts pieces.
    """
    lo0, hi0 = geometry.wall_jets(0.0)
    if not (lo0.value < hi0.value):
        raise GeometryError("walls are not ordered at t = 0")
    fiber_pieces = 1
    exit_arcs = 0
    if lo0.d1 >= -1.0:  # lower arc [-1, dh1/dt] nonempty
        exit_arcs += 1
    if hi0.d1 <= 1.0:  # upper arc [dh2/dt, 1] nonempty
        exit_arcs += 1
    return (fiber_pieces, exit_arcs)


def fixed_point_index(geometry: SegmentGeometry) -> int:
    """Fixed-point index the block forces on the period map inside the band.

    Since the return identification is the identity, the index is the
    difference of the Euler characteristics of the fiber and of its
    essential-exit set.
    """
    chi_fiber, chi_exit = fiber_euler_characteristics(geometry)
    return chi_fiber - chi_exit
