"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """Raised when inputs violate the preconditions of an operation."""


class NoRoot(RuntimeError):
    """A bracketed root search found no sign change."""


class Unresolved(RuntimeError):
    """A sign change could not be isolated to the requested width."""


class FixedPointDivergence(RuntimeError):
    """The implicit time step failed to converge even at the smallest dt."""
