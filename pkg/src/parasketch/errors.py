"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """A data-dependent numerical precondition failed.

    Raised when an input matrix violates a rank or conditioning assumption
    that the requested quantity needs (for example a coefficient matrix whose
    smallest singular value is too close to zero for a bound to be defined).
    Argument and configuration mistakes raise plain ValueError instead.
    """
