class MpisolveError(Exception):
    """Base class for all library errors."""


class ValidationError(MpisolveError):
    """Invalid input: bad shapes, malformed files, out-of-range parameters."""


class NumericalError(MpisolveError):
    """Numerical failure: singular matrices, non-finite gradients, diverged solves."""
