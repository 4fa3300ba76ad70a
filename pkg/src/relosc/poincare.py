"""Fixed points of the stroboscopic map inside a certified band.

The search evaluates the displacement field P(x) - x of the period map P on
cell boundaries, reads off its topological degree (winding number), and
subdivides: cells of zero winding cannot hold a nondegenerate fixed point
and are dropped, cells of nonzero or undetermined winding are split until
they are small enough to hand to a damped Newton iteration. A certified band
geometry guarantees the map carries a fixed point of index -1 somewhere in
the band, so an empty in-band result on certified input is reported as a
failure rather than an answer.

Boundary evaluations within one contour are independent; set RELOSC_THREADS
to run them on a thread pool (unset or 1 = serial, 0 = one per CPU). The
reduction is ordering-independent, so results do not depend on the setting.
"""

from __future__ import annotations

import logging
import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

from .dynamics import Problem
from .errors import (
    FixedPointOnBoundaryError,
    LuminalGuardError,
    SearchError,
)
from .integrate import (
    EVENT_CROSSED_H1,
    EVENT_CROSSED_H2,
    EVENT_LUMINAL,
    IntegratorOptions,
    Trajectory,
    integrate,
    period_map_step,
)
from .segment import SegmentGeometry

__all__ = [
    "Rect",
    "SearchOptions",
    "PeriodicSolution",
    "displacement",
    "winding_number",
    "find_periodic",
]

log = logging.getLogger(__name__)

_TAU = 2.0 * math.pi


def _thread_count() -> int:
    raw = os.environ.get("RELOSC_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RELOSC_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("RELOSC_THREADS must be nonnegative")
    if n == 0:
        return os.cpu_count() or 1
    return n


def _map_ordered(fn, items: Sequence) -> list:
    """Apply fn over items, preserving order; threaded when RELOSC_THREADS asks."""
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class Rect:
    """An axis-aligned search cell in the (q, p) plane."""

    q_lo: float
    q_hi: float
    p_lo: float
    p_hi: float

    def __post_init__(self):
        if not (self.q_lo < self.q_hi and self.p_lo < self.p_hi):
            raise ValueError("rect requires q_lo < q_hi and p_lo < p_hi")

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.q_lo + self.q_hi), 0.5 * (self.p_lo + self.p_hi))

    @property
    def diameter(self) -> float:
        return math.hypot(self.q_hi - self.q_lo, self.p_hi - self.p_lo)

    def subdivide(self) -> Tuple["Rect", "Rect", "Rect", "Rect"]:
        qm, pm = self.center
        return (
            Rect(self.q_lo, qm, self.p_lo, pm),
            Rect(qm, self.q_hi, self.p_lo, pm),
            Rect(self.q_lo, qm, pm, self.p_hi),
            Rect(qm, self.q_hi, pm, self.p_hi),
        )

    def shrunk(self, fraction: float) -> "Rect":
        dq = fraction * (self.q_hi - self.q_lo)
        dp = fraction * (self.p_hi - self.p_lo)
        return Rect(self.q_lo + dq, self.q_hi - dq, self.p_lo + dp, self.p_hi - dp)

    def boundary_points(self, n: int) -> List[Tuple[float, float]]:
        """n or slightly more points tracing the boundary counterclockwise.

        Points are spread over the four edges proportionally to length, at
        least two per edge, each edge half-open so the loop has no repeats.
        """
        w = self.q_hi - self.q_lo
        h = self.p_hi - self.p_lo
        per = 2.0 * (w + h)
        m_w = max(2, round(n * w / per))
        m_h = max(2, round(n * h / per))
        pts: List[Tuple[float, float]] = []
        for i in range(m_w):  # bottom, left to right
            pts.append((self.q_lo + w * i / m_w, self.p_lo))
        for i in range(m_h):  # right, upward
            pts.append((self.q_hi, self.p_lo + h * i / m_h))
        for i in range(m_w):  # top, right to left
            pts.append((self.q_hi - w * i / m_w, self.p_hi))
        for i in range(m_h):  # left, downward
            pts.append((self.q_lo, self.p_hi - h * i / m_h))
        return pts


@dataclass(frozen=True)
class SearchOptions:
    """Knobs for the degree-guided search; defaults match the solver defaults."""

    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    residual_tol: float = 1e-9
    dedupe_radius: float = 1e-6
    band_inset: float = 1e-6
    newton_fd_step: float = 1e-6
    newton_max_iter: int = 50
    cell_min_diameter: float = 1e-3
    boundary_n: int = 64
    boundary_n_max: int = 1024
    subdivision_budget: int = 1024
    local_index_radius: float = 1e-2

    def __post_init__(self):
        if self.boundary_n < 64:
            raise ValueError("boundary_n must be at least 64")
        if self.boundary_n_max < self.boundary_n:
            raise ValueError("boundary_n_max must be at least boundary_n")
        for name in ("residual_tol", "dedupe_radius", "band_inset", "newton_fd_step",
                     "cell_min_diameter", "local_index_radius"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PeriodicSolution:
    """A refined fixed point of the period map and its one-period trajectory.

    local_index is -1 or +1 for a nondegenerate point, None when the winding
    around it could not be determined. in_band records whether the trajectory
    stays strictly between the walls for the whole period, which is what a
    certified geometry promises for at least one solution.
    """

    q: float
    p: float
    residual_norm: float
    local_index: Optional[int]
    in_band: bool
    trajectory: Trajectory

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "p": self.p,
            "residual": self.residual_norm,
            "local_index": self.local_index if self.local_index is not None else "undetermined",
            "in_band": self.in_band,
        }


def displacement(
    x: Tuple[float, float],
    problem: Problem,
    options: Optional[IntegratorOptions] = None,
) -> Tuple[float, float]:
    """One-period displacement P(x) - x; zero exactly at periodic states."""
    (q1, p1), _ = period_map_step(x, problem, options)
    return (q1 - x[0], p1 - x[1])


def _winding_of_field(
    field_fn: Callable[[Tuple[float, float]], Tuple[float, float]],
    rect: Rect,
    n: int,
    min_norm: float,
) -> Tuple[str, Optional[int], Optional[Tuple[Tuple[float, float], float]]]:
    """One fixed-resolution winding pass of a planar field around a rect.

    Returns ("ok", w, None) when every consecutive turn is under a quarter
    circle and all samples clear min_norm; ("small_norm", None, (point, norm))
    when some boundary sample is nearly a zero of the field; and
    ("inadequate", None, None) when the sampling is too coarse to trust.
    """
    pts = rect.boundary_points(n)
    vals = _map_ordered(field_fn, pts)
    worst: Optional[Tuple[Tuple[float, float], float]] = None
    for pt, (dq, dp) in zip(pts, vals):
        norm = math.hypot(dq, dp)
        if norm < min_norm and (worst is None or norm < worst[1]):
            worst = (pt, norm)
    if worst is not None:
        return ("small_norm", None, worst)
    angles = [math.atan2(dp, dq) for dq, dp in vals]
    total = 0.0
    prev = angles[-1]
    for ang in angles:
        step = math.remainder(ang - prev, _TAU)
        if abs(step) >= 0.5 * math.pi:
            return ("inadequate", None, None)
        total += step
        prev = ang
    w = round(total / _TAU)
    if abs(total - w * _TAU) > 1e-6:
        return ("inadequate", None, None)
    return ("ok", int(w), None)


def winding_number(
    rect: Rect,
    problem: Problem,
    options: Optional[SearchOptions] = None,
    boundary_n: Optional[int] = None,
) -> Optional[int]:
    """Degree of the displacement field around rect, or None if undetermined.

    Starts at boundary_n samples and doubles the resolution until either the
    sampling-adequacy test passes (every consecutive field direction turns by
    less than a quarter circle) or the cap is reached, in which case None is
    returned. A boundary sample whose displacement norm falls below ten times
    the residual tolerance raises FixedPointOnBoundaryError at once: the
    degree over that contour is not defined, and refinement keeps the
    offending sample, so it could never recover. A luminal-guard escape on
    the boundary also yields None, since the map is not defined there.
    """
    opts = options if options is not None else SearchOptions()
    n = boundary_n if boundary_n is not None else opts.boundary_n
    if n < 64:
        raise ValueError("boundary_n must be at least 64")
    min_norm = 10.0 * opts.residual_tol

    def field_fn(x: Tuple[float, float]) -> Tuple[float, float]:
        return displacement(x, problem, opts.integrator)

    while True:
        try:
            status, w, offender = _winding_of_field(field_fn, rect, n, min_norm)
        except LuminalGuardError:
            return None
        if status == "ok":
            return w
        if status == "small_norm":
            raise FixedPointOnBoundaryError(offender[0], offender[1])
        if n >= opts.boundary_n_max:
            return None
        n = min(2 * n, opts.boundary_n_max)


def _solve_2x2(a, b, c, d, r1, r2) -> Optional[Tuple[float, float]]:
    det = a * d - b * c
    if det == 0.0 or not math.isfinite(det):
        return None
    return ((r1 * d - r2 * b) / det, (a * r2 - c * r1) / det)


def _newton(
    field_fn: Callable[[Tuple[float, float]], Tuple[float, float]],
    seed: Tuple[float, float],
    opts: SearchOptions,
    admissible: Callable[[Tuple[float, float]], bool],
) -> Optional[Tuple[float, float, float]]:
    """Damped Newton on the displacement field from one seed.

    Forward-difference Jacobian, backtracking on the residual norm, iterates
    constrained to admissible states. Returns (q, p, |F|) on convergence,
    None when the seed stalls or walks out of bounds.
    """
    x = seed
    if not admissible(x):
        return None
    try:
        fx = field_fn(x)
    except LuminalGuardError:
        return None
    nx = math.hypot(*fx)
    h = opts.newton_fd_step
    for _ in range(opts.newton_max_iter):
        if nx < opts.residual_tol:
            return (x[0], x[1], nx)
        try:
            fq = field_fn((x[0] + h, x[1]))
            fp = field_fn((x[0], x[1] + h))
        except LuminalGuardError:
            return None
        j11 = (fq[0] - fx[0]) / h
        j21 = (fq[1] - fx[1]) / h
        j12 = (fp[0] - fx[0]) / h
        j22 = (fp[1] - fx[1]) / h
        step = _solve_2x2(j11, j12, j21, j22, -fx[0], -fx[1])
        if step is None:
            return None
        lam = 1.0
        moved = False
        for _ in range(25):
            cand = (x[0] + lam * step[0], x[1] + lam * step[1])
            if admissible(cand):
                try:
                    fc = field_fn(cand)
                except LuminalGuardError:
                    lam *= 0.5
                    continue
                nc = math.hypot(*fc)
                if nc < nx:
                    x, fx, nx = cand, fc, nc
                    moved = True
                    break
            lam *= 0.5
        if not moved:
            return None
    return (x[0], x[1], nx) if nx < opts.residual_tol else None


def _too_close(a: Tuple[float, float], b: Tuple[float, float], radius: float,
               topology: str) -> bool:
    dq = a[0] - b[0]
    if topology == "circle":
        dq = math.remainder(dq, _TAU)
    return math.hypot(dq, a[1] - b[1]) <= radius


def find_periodic(
    problem: Problem,
    geometry: SegmentGeometry,
    options: Optional[SearchOptions] = None,
) -> List[PeriodicSolution]:
    """Locate fixed points of the period map inside the band, sorted by (q, p).

    Subdivision is breadth-first from one seed cell spanning the band at
    t = 0 (inset from the walls and from the luminal faces): zero-winding
    cells are discarded, others are split, and Newton refinement runs from
    the centers of every cell with nonzero winding, from cells at the size
    floor, and from any boundary sample that sits on top of a fixed point.
    Each converged point is re-checked at ten-times-tightened integrator
    tolerances, deduplicated, integrated for one period to record its
    trajectory and in-band flag, and given a local index by a winding pass
    around a small surrounding rectangle.

    A certified geometry promises an in-band solution; if none survives, or
    the subdivision budget runs out, SearchError is raised. On a geometry
    built with allow_failed=True the search is best-effort and may return an
    empty list.
    """
    opts = options if options is not None else SearchOptions()
    eps = opts.integrator.luminal_guard
    delta = opts.band_inset
    h1_0, h2_0 = geometry.barriers.values(0.0)
    p_inset = eps + delta
    if h2_0 - h1_0 <= 2.0 * delta or p_inset >= 1.0:
        raise SearchError("band too narrow for the configured insets")
    seed_rect = Rect(h1_0 + delta, h2_0 - delta, -1.0 + p_inset, 1.0 - p_inset)
    band_width = h2_0 - h1_0

    def admissible(x: Tuple[float, float]) -> bool:
        return (
            h1_0 - 0.5 * band_width <= x[0] <= h2_0 + 0.5 * band_width
            and abs(x[1]) < 1.0 - eps - 1e-12
        )

    def field_fn(x: Tuple[float, float]) -> Tuple[float, float]:
        return displacement(x, problem, opts.integrator)

    seeds: List[Tuple[float, float]] = []

    def cell_winding(rect: Rect, refine: bool = False) -> Optional[int]:
        # During the search, refinement normally comes from subdividing the
        # cell, not from resampling its contour, so a single pass at the base
        # resolution is enough and an inadequately sampled cell is simply
        # left undetermined. A shrunk retry contour is the exception: it was
        # deliberately placed near a fixed point, so resampling is the only
        # refinement it can get.
        n = opts.boundary_n
        while True:
            try:
                status, w, offender = _winding_of_field(
                    field_fn, rect, n, 10.0 * opts.residual_tol
                )
            except LuminalGuardError:
                return None
            if status == "ok":
                return w
            if status == "small_norm":
                raise FixedPointOnBoundaryError(offender[0], offender[1])
            if not refine or n >= opts.boundary_n_max:
                return None
            n = min(2 * n, opts.boundary_n_max)

    def classify_cell(rect: Rect) -> Tuple[Optional[int], bool]:
        """(winding, exact): exact is False when the contour had to be moved."""
        try:
            return cell_winding(rect), True
        except FixedPointOnBoundaryError as exc:
            # A fixed point sits (numerically) on this contour; degree over
            # it is unusable. Hand the offender and the cell center to
            # Newton, then retry the contour one percent inside: far enough
            # from the offender for the sampler to resolve the field's
            # rotation there, close enough to see the same interior.
            seeds.append(exc.point)
            seeds.append(rect.center)
            try:
                return cell_winding(rect.shrunk(0.01), refine=True), False
            except FixedPointOnBoundaryError:
                return None, False

    queue = deque([(seed_rect,) + classify_cell(seed_rect)])
    subdivisions = 0
    while queue:
        rect, w, exact = queue.popleft()
        if w == 0:
            continue
        if w is not None:
            seeds.append(rect.center)
        if rect.diameter < opts.cell_min_diameter:
            if w is None:
                seeds.append(rect.center)
            continue
        if subdivisions >= opts.subdivision_budget:
            raise SearchError(
                f"subdivision budget ({opts.subdivision_budget}) exhausted with "
                "cells still unresolved"
            )
        subdivisions += 1
        children = rect.subdivide()
        classified = [classify_cell(c) for c in children]
        # degree additivity audit, meaningful only over the true contours
        if exact and w is not None and all(cw is not None and ce for cw, ce in classified):
            total = sum(cw for cw, _ in classified)
            if total != w:
                log.warning(
                    "degree additivity violated on subdivision: parent %d, "
                    "children sum %d",
                    w,
                    total,
                )
        queue.extend((child,) + cls for child, cls in zip(children, classified))

    tight = opts.integrator.tightened(10.0)

    def tight_field(x: Tuple[float, float]) -> Tuple[float, float]:
        return displacement(x, problem, tight)

    found: List[Tuple[float, float, float]] = []
    for seed in dict.fromkeys(seeds):
        hit = _newton(field_fn, seed, opts, admissible)
        if hit is None:
            continue
        q, p, _ = hit
        try:
            dq, dp = tight_field((q, p))
        except LuminalGuardError:
            continue
        res = math.hypot(dq, dp)
        if res >= opts.residual_tol:
            polished = _newton(tight_field, (q, p), replace(opts, newton_max_iter=10),
                               admissible)
            if polished is None:
                continue
            q, p, res = polished
        duplicate = False
        for i, other in enumerate(found):
            if _too_close((q, p), (other[0], other[1]), opts.dedupe_radius,
                          problem.topology):
                if res < other[2]:
                    found[i] = (q, p, res)
                duplicate = True
                break
        if not duplicate:
            found.append((q, p, res))

    if not found and geometry.certified:
        raise SearchError(
            "no fixed point of the period map converged inside a certified band; "
            "this indicates numerical trouble, not absence"
        )

    solutions: List[PeriodicSolution] = []
    h_values = geometry.barriers.values
    for q, p, res in sorted(found):
        traj = integrate(0.0, q, p, problem.period, problem, opts.integrator, geometry)
        stayed = traj.completed and not any(
            ev.kind in (EVENT_CROSSED_H1, EVENT_CROSSED_H2, EVENT_LUMINAL)
            for ev in traj.events
        )
        in_band = stayed
        if in_band:
            for t, qt, _, _ in traj.samples:
                lo, hi = h_values(t)
                if not (lo < qt < hi):
                    in_band = False
                    break
        solutions.append(
            PeriodicSolution(
                q=q,
                p=p,
                residual_norm=res,
                local_index=_local_index((q, p), problem, opts, admissible),
                in_band=in_band,
                trajectory=traj,
            )
        )

    if geometry.certified and not any(s.in_band for s in solutions):
        raise SearchError(
            "certified band produced no in-band periodic solution; "
            "this indicates numerical trouble, not absence"
        )
    return solutions


def _local_index(
    x: Tuple[float, float],
    problem: Problem,
    opts: SearchOptions,
    admissible: Callable[[Tuple[float, float]], bool],
) -> Optional[int]:
    r = opts.local_index_radius
    eps = opts.integrator.luminal_guard
    p_lo = max(x[1] - r, -1.0 + eps + 1e-9)
    p_hi = min(x[1] + r, 1.0 - eps - 1e-9)
    if p_hi - p_lo < 1e-6:
        return None
    rect = Rect(x[0] - r, x[0] + r, p_lo, p_hi)
    try:
        w = winding_number(rect, problem, opts)
    except FixedPointOnBoundaryError:
        return None
    if w in (-1, 1):
        return w
    return None
