"""Periodic solutions of a speed-limited particle under periodic forcing.

The package certifies moving bands whose walls repel trajectories, builds
the induced block geometry, and localizes fixed points of the period map by
topological degree plus Newton refinement. Problem files, report documents,
and the command line live in problem_io and cli.
"""

from .barrier import (
    BarrierPair,
    CertificateReport,
    HypothesisCheck,
    condition_residual,
    suggest_grid,
    verify_certificate,
)
from .dynamics import (
    Problem,
    State,
    momentum_to_velocity,
    rhs,
    rhs_regularized,
    velocity_to_momentum,
)
from .errors import (
    BarrierValidationError,
    DisallowedVariableError,
    ExprError,
    ExprEvalError,
    ExprSyntaxError,
    FixedPointOnBoundaryError,
    GeometryError,
    IntegrationError,
    LuminalGuardError,
    LuminalVelocityError,
    MaxStepsExceededError,
    NondifferentiableError,
    ProblemFileError,
    ReloscError,
    ScenarioValidationError,
    SearchError,
    SlopeViolationError,
    UndeterminedTangencyError,
    UnknownIdentifierError,
)
from .expr import Expression, Jet2, parse
from .integrate import (
    IntegratorOptions,
    Trajectory,
    TrajectoryEvent,
    integrate,
    period_map_step,
)
from .poincare import (
    PeriodicSolution,
    Rect,
    SearchOptions,
    displacement,
    find_periodic,
    winding_number,
)
from .scenarios import (
    Scenario,
    ScenarioHypothesisReport,
    curve_constrained,
    pendulum,
    rotating_field,
)
from .segment import (
    BoundaryClass,
    SegmentGeometry,
    classify_point,
    fiber_euler_characteristics,
    fixed_point_index,
    monodromy,
    segment_map,
    segment_map_inverse,
    tangency_residual,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BarrierPair",
    "BarrierValidationError",
    "BoundaryClass",
    "CertificateReport",
    "DisallowedVariableError",
    "ExprError",
    "ExprEvalError",
    "ExprSyntaxError",
    "Expression",
    "FixedPointOnBoundaryError",
    "GeometryError",
    "HypothesisCheck",
    "IntegrationError",
    "IntegratorOptions",
    "Jet2",
    "LuminalGuardError",
    "LuminalVelocityError",
    "MaxStepsExceededError",
    "NondifferentiableError",
    "PeriodicSolution",
    "Problem",
    "ProblemFileError",
    "Rect",
    "ReloscError",
    "Scenario",
    "ScenarioHypothesisReport",
    "ScenarioValidationError",
    "SearchError",
    "SearchOptions",
    "SegmentGeometry",
    "SlopeViolationError",
    "State",
    "Trajectory",
    "TrajectoryEvent",
    "UndeterminedTangencyError",
    "UnknownIdentifierError",
    "classify_point",
    "condition_residual",
    "curve_constrained",
    "displacement",
    "fiber_euler_characteristics",
    "find_periodic",
    "fixed_point_index",
    "integrate",
    "momentum_to_velocity",
    "monodromy",
    "parse",
    "pendulum",
    "period_map_step",
    "rhs",
    "rhs_regularized",
    "rotating_field",
    "segment_map",
    "segment_map_inverse",
    "suggest_grid",
    "tangency_residual",
    "velocity_to_momentum",
    "verify_certificate",
    "winding_number",
]
