"""Exception hierarchy and warning categories used across the library."""


class IntermenuError(Exception):
    """Base class for all library-specific errors."""


class RegularityError(IntermenuError):
    """A prior fails positivity or Myerson regularity and is rejected at load."""


class DegenerateInterval(IntermenuError):
    """A conditioning interval carries no usable probability mass."""


class RecursionCollapse(IntermenuError):
    """The posterior-type recursion ran out of room below: the requested item
    count is too large for this bias. Callers fall back to a smaller count."""


class NonMonotoneQualities(IntermenuError):
    """Computed optimal qualities are not strictly increasing among positive
    entries; signals a regularity failure in the supplied prior."""


class CapReached(IntermenuError):
    """The item-count search hit its hard cap (bias too close to zero)."""


class NoInteriorSolution(IntermenuError):
    """A bisection bracket failed to enclose a sign change."""


class NoFeasiblePattern(IntermenuError):
    """No restricted-menu candidate passed the obedience filter. Should not
    occur: every bias admits at least the obedience-pinned solution."""


class CertificateFailed(IntermenuError):
    """No valid dual price function exists for the candidate posterior.

    This is a detection mechanism, not a bug: it is how non-obedient
    proposals are recognised.
    """

    def __init__(self, condition: str, location: float | None = None,
                 detail: str = ""):
        self.condition = condition
        self.location = location
        self.detail = detail
        where = f" at w={location:.6g}" if location is not None else ""
        extra = f" ({detail})" if detail else ""
        super().__init__(f"dual price condition {condition} violated{where}{extra}")


class LpInfeasible(IntermenuError):
    """The recommendation LP failed to solve. The all-outside-option plan is
    always feasible, so this indicates a solver failure, not a model state."""


class OutOfRegime(IntermenuError):
    """A closed-form formula was requested outside its validity region."""


class ConfigError(IntermenuError):
    """Invalid run configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class QualityCapWarning(UserWarning):
    """The quality ceiling binds at the solution; results are clamped."""


class PreconditionUnverified(UserWarning):
    """A benchmark's preconditions (convex marginal cost, density shape)
    could not be confirmed; the result is still returned, flagged."""
