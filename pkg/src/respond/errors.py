"""Exception hierarchy shared by every module."""


class RespondError(Exception):
    """Base class for library errors."""


class NoConvergence(RespondError):
    pass


class DegenerateZero(RespondError):
    """The equilibrium is not a simple zero (g'(c0) vanishes)."""


class BudgetExceeded(RespondError):
    """An enumeration would visit more objects than the configured budget."""


class EmptySupport(RespondError):
    pass


class ZeroEps(RespondError):
    pass


class SingularPropagator(RespondError):
    """D(eps, omega.nu) vanished on some line."""


class ClassificationContradiction(RespondError):
    """A node that must own a well-separated line has none.

    Usually means the divisor constant was estimated on too small a ball.
    """


class InsufficientData(RespondError):
    pass


class SpecError(RespondError):
    """Malformed problem specification input."""
