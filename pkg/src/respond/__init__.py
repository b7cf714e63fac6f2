"""Response solutions of strongly dissipative quasi-periodically forced oscillators.

The equation is ``eps x'' + x' + eps g(x) = eps f(omega t)`` with ``g`` a real
polynomial and ``f`` a real trigonometric polynomial. Coefficients of the
response solution are computed both by labelled-tree summation and by a direct
Fourier recursion, and the two are cross-checked.
"""

from respond.errors import (
    BudgetExceeded,
    ClassificationContradiction,
    DegenerateZero,
    EmptySupport,
    InsufficientData,
    NoConvergence,
    RespondError,
    SingularPropagator,
    SpecError,
    ZeroEps,
)
from respond.problem import (
    ForcingSpectrum,
    FrequencyVector,
    NonlinearityTaylor,
    ProblemSpec,
    find_equilibrium,
    load_spec,
    make_spec,
    taylor_at,
    validate_spec,
)

__all__ = [
    "BudgetExceeded",
    "ClassificationContradiction",
    "DegenerateZero",
    "EmptySupport",
    "ForcingSpectrum",
    "FrequencyVector",
    "InsufficientData",
    "NoConvergence",
    "NonlinearityTaylor",
    "ProblemSpec",
    "RespondError",
    "SingularPropagator",
    "SpecError",
    "ZeroEps",
    "find_equilibrium",
    "load_spec",
    "make_spec",
    "taylor_at",
    "validate_spec",
]

__version__ = "0.1.0"
