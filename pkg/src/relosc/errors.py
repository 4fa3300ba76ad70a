"""Exception taxonomy for the relosc package.

Everything raised on purpose derives from ReloscError so callers (and the CLI)
can distinguish domain failures from programming errors.
"""

__all__ = [
    "ReloscError",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "DisallowedVariableError",
    "ExprEvalError",
    "NondifferentiableError",
    "LuminalVelocityError",
    "BarrierValidationError",
    "SlopeViolationError",
    "GeometryError",
    "UndeterminedTangencyError",
    "IntegrationError",
    "MaxStepsExceededError",
    "LuminalGuardError",
    "SearchError",
    "FixedPointOnBoundaryError",
    "ScenarioValidationError",
    "ProblemFileError",
]


class ReloscError(Exception):
    """Base class for all library errors."""


class ExprError(ReloscError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    """Malformed expression text.

    Attributes:
        offset: byte offset into the source text where parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    """Identifier is neither a known variable, constant, nor function."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier '{name}' (byte offset {offset})")
        self.name = name
        self.offset = offset


class DisallowedVariableError(ExprError):
    """Variable exists in the language but is not permitted in this context."""

    def __init__(self, name: str, allowed, offset: int):
        allowed_txt = ", ".join(sorted(allowed)) or "none"
        super().__init__(
            f"variable '{name}' not allowed here (allowed: {allowed_txt}; byte offset {offset})"
        )
        self.name = name
        self.offset = offset


class ExprEvalError(ExprError):
    """Evaluation produced a non-finite value or hit a domain error.

    Attributes:
        node_text: canonical text of the innermost failing subexpression.
    """

    def __init__(self, message: str, node_text: str = ""):
        super().__init__(message if not node_text else f"{message} in '{node_text}'")
        self.node_text = node_text


class NondifferentiableError(ExprEvalError):
    """Derivative requested where it does not exist (abs at 0, sqrt at 0)."""


class LuminalVelocityError(ReloscError, ValueError):
    """|velocity| >= 1 where a subluminal value is required."""


class BarrierValidationError(ReloscError):
    """Barrier expressions failed structural validation (periodicity, smoothness, variables)."""


class SlopeViolationError(ReloscError):
    """|dh/dt| >= 1 at some time, so the wall condition cannot be evaluated there."""

    def __init__(self, side: str, t: float):
        super().__init__(f"{side} wall slope reaches |dh/dt| >= 1 at t = {t!r}")
        self.side = side
        self.t = t


class GeometryError(ReloscError):
    """Invalid use of a band geometry (failed certificate, point outside, bad time)."""


class UndeterminedTangencyError(ReloscError):
    """Tangent boundary point whose curvature test is exactly zero; no classification."""

    def __init__(self, side: str, t: float):
        super().__init__(
            f"tangency on the {side} wall at t = {t!r} has zero curvature residual; "
            "cannot classify"
        )
        self.side = side
        self.t = t


class IntegrationError(ReloscError):
    """Base class for integration failures."""


class MaxStepsExceededError(IntegrationError):
    """Step budget exhausted before reaching the requested end time."""


class LuminalGuardError(IntegrationError):
    """Integration halted at the luminal guard before completing its contract."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SearchError(ReloscError):
    """Fixed-point search failed (budget exhausted or certified solution not found)."""


class FixedPointOnBoundaryError(ReloscError):
    """A winding contour sample has near-zero displacement; degree is undefined there.

    Attributes:
        point: the offending (q, p) sample.
    """

    def __init__(self, point, norm: float):
        super().__init__(
            f"displacement norm {norm:.3e} at boundary point {point} is below threshold"
        )
        self.point = point
        self.norm = norm


class ScenarioValidationError(ReloscError):
    """Scenario parameters fail their geometric prerequisites."""


class ProblemFileError(ReloscError):
    """Problem file cannot be parsed or violates the input schema."""
