"""Problem instances: frequency vector, forcing spectrum and Taylor data of g.

Modes are tuples of ints of length ``d``; ``|nu|`` is always the l1 norm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from respond.errors import DegenerateZero, NoConvergence, SpecError

Mode = tuple[int, ...]

MAX_NEWTON_ITER = 100
DEFAULT_TOL = 1e-12
# l1 radius used by the (advisory) rational-dependence check
DEPENDENCE_CHECK_RADIUS = 8


def l1(nu: Sequence[int]) -> int:
    return sum(abs(c) for c in nu)


def dot(omega: Sequence[float], nu: Sequence[int]) -> float:
    return math.fsum(w * n for w, n in zip(omega, nu))


@dataclass(frozen=True)
class FrequencyVector:
    omega: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        if len(self.omega) < 1:
            raise SpecError("frequency vector needs d >= 1")

    @property
    def d(self) -> int:
        return len(self.omega)

    def dot(self, nu: Sequence[int]) -> float:
        return dot(self.omega, nu)


@dataclass(frozen=True)
class ForcingSpectrum:
    """Finite Fourier data of f, average kept apart from the nonzero modes."""

    modes: Mapping[Mode, complex]
    average: float = 0.0
    xi: float = 1.0

    def __post_init__(self):
        clean = {tuple(int(c) for c in nu): complex(v) for nu, v in self.modes.items()}
        object.__setattr__(self, "modes", dict(sorted(clean.items())))

    @property
    def support(self) -> tuple[Mode, ...]:
        """Modes with nonzero amplitude, sorted."""
        return tuple(nu for nu, v in self.modes.items() if v != 0)

    @property
    def max_norm(self) -> int:
        return max((l1(nu) for nu in self.support), default=0)

    def __call__(self, psi: Sequence[float]) -> complex:
        total = complex(self.average)
        for nu, v in self.modes.items():
            total += v * np.exp(1j * float(np.dot(nu, psi)))
        return total


@dataclass(frozen=True)
class NonlinearityTaylor:
    """Taylor data of g at the equilibrium: ``coeffs[p-1] == a_p``."""

    c0: float
    coeffs: tuple[float, ...]
    g0: float = 0.0  # g(c0); equals the forcing average up to root tolerance

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def P(self) -> int:
        return len(self.coeffs)

    @property
    def a(self) -> float:
        return self.coeffs[0]

    def a_p(self, p: int) -> float:
        if 1 <= p <= self.P:
            return self.coeffs[p - 1]
        return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    frequency: FrequencyVector
    forcing: ForcingSpectrum
    nonlinearity: NonlinearityTaylor
    g_poly: tuple[float, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.frequency.d

    @property
    def omega(self) -> tuple[float, ...]:
        return self.frequency.omega

    @property
    def a(self) -> float:
        return self.nonlinearity.a

    @property
    def support(self) -> tuple[Mode, ...]:
        return self.forcing.support

    def f(self, nu: Mode) -> complex:
        return self.forcing.modes.get(nu, 0j)


def find_equilibrium(
    g_poly: Sequence[float],
    f_average: float,
    initial_guess: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> float:
    """Newton iteration for a simple zero of ``g(x) - f_average``.

    ``g_poly`` holds coefficients in ascending degree.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = Polynomial(g_poly) - f_average
    if g.degree() < 1:
        raise ValueError("g must have degree >= 1")
    dg = g.deriv()
    x = float(initial_guess)
    # iterate until the step is at rounding level, not merely until |g| <= tol
    for _ in range(max_iter):
        gx, dgx = g(x), dg(x)
        if gx == 0:
            break
        if dgx == 0:
            raise DegenerateZero(f"g'(x) = 0 at x = {x!r} during Newton iteration")
        step = gx / dgx
        x -= step
        if not math.isfinite(x):
            raise NoConvergence("Newton iterate diverged")
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(x)) and abs(g(x)) <= tol:
            break
    if abs(g(x)) > tol:
        raise NoConvergence(f"no root within {max_iter} iterations (last x = {x!r})")
    if abs(dg(x)) <= tol:
        raise DegenerateZero(f"|g'(c0)| = {abs(dg(x))!r} <= tol at c0 = {x!r}")
    return x


def taylor_at(g_poly: Sequence[float], c0: float, P: int | None = None) -> NonlinearityTaylor:
    """Re-centre ``g`` at ``c0``: coefficients of ``g(c0 + u)`` in powers of ``u``.

    Exact for polynomial ``g`` (up to float rounding of the composition).
    ``P`` truncates; it defaults to the degree of ``g``.
    """
    g = Polynomial(g_poly)
    shifted = g(Polynomial([c0, 1.0])).coef
    deg = len(shifted) - 1
    if P is None:
        P = max(deg, 1)
    if P < 1:
        raise ValueError("P must be >= 1")
    coeffs = [float(shifted[p]) if p <= deg else 0.0 for p in range(1, P + 1)]
    if coeffs[0] == 0:
        raise DegenerateZero("a_1 = g'(c0) vanishes")
    return NonlinearityTaylor(c0=float(c0), coeffs=tuple(coeffs), g0=float(shifted[0]))


def _near_dependences(omega: Sequence[float], radius: int, tol: float) -> list[Mode]:
    hits = []
    d = len(omega)
    for nu in product(range(-radius, radius + 1), repeat=d):
        if 0 < l1(nu) <= radius and abs(dot(omega, nu)) <= tol:
            hits.append(nu)
    return hits


def validate_spec(spec: ProblemSpec, dependence_radius: int = DEPENDENCE_CHECK_RADIUS) -> list[str]:
    """Return a list of human-readable violations; an empty list means valid."""
    problems: list[str] = []
    omega = spec.frequency.omega
    d = len(omega)
    if not all(math.isfinite(w) for w in omega) or all(w == 0 for w in omega):
        problems.append("frequency vector must be finite and nonzero")
    modes = spec.forcing.modes
    if not isinstance(modes, Mapping) or not math.isfinite(len(modes)):
        problems.append("finite support: forcing must have finitely many modes")
    for nu in modes:
        if len(nu) != d:
            problems.append(f"dimension mismatch: mode {nu} has length {len(nu)}, expected {d}")
    if any(all(c == 0 for c in nu) for nu in modes):
        problems.append("the zero mode belongs in the average, not in modes")
    for nu, v in modes.items():
        partner = modes.get(tuple(-c for c in nu), 0j)
        if abs(partner - v.conjugate()) > 1e-14 * max(1.0, abs(v)):
            problems.append(f"Hermitian symmetry violated: f{nu} = {v}, f{tuple(-c for c in nu)} = {partner}")
            break
    if not math.isfinite(spec.forcing.xi) or spec.forcing.xi <= 0:
        problems.append("xi must be a positive real")
    nl = spec.nonlinearity
    if nl.P < 1 or nl.a == 0:
        problems.append("simple zero violated: a_1 = g'(c0) = 0")
    if spec.g_poly and abs(nl.g0 - spec.forcing.average) > 1e-8 * max(1.0, abs(spec.forcing.average)):
        problems.append(f"equilibrium mismatch: g(c0) = {nl.g0} differs from average {spec.forcing.average}")
    if d <= 3 and all(math.isfinite(w) for w in omega):
        hits = _near_dependences(omega, dependence_radius, 1e-12 * max(abs(w) for w in omega))
        if hits:
            problems.append(f"rational dependence detected at nu = {hits[0]} (advisory check)")
    return problems


def make_spec(
    omega: Sequence[float],
    modes: Mapping[Sequence[int], complex],
    g_poly: Sequence[float],
    f_average: float = 0.0,
    c0_guess: float = 0.0,
    P: int | None = None,
    xi: float = 1.0,
) -> ProblemSpec:
    """Build a spec from raw data, solving for the equilibrium and Taylor data."""
    c0 = find_equilibrium(g_poly, f_average, c0_guess)
    taylor = taylor_at(g_poly, c0, P)
    return ProblemSpec(
        frequency=FrequencyVector(tuple(omega)),
        forcing=ForcingSpectrum({tuple(nu): v for nu, v in modes.items()}, float(f_average), float(xi)),
        nonlinearity=taylor,
        g_poly=tuple(float(c) for c in g_poly),
    )


def spec_from_dict(doc: Mapping) -> ProblemSpec:
    try:
        modes = {tuple(int(c) for c in m["nu"]): complex(m.get("re", 0.0), m.get("im", 0.0)) for m in doc["modes"]}
        return make_spec(
            omega=[float(w) for w in doc["omega"]],
            modes=modes,
            g_poly=[float(c) for c in doc["g_poly"]],
            f_average=float(doc.get("f_average", 0.0)),
            c0_guess=float(doc.get("c0_guess", 0.0)),
            P=int(doc["P"]) if doc.get("P") is not None else None,
            xi=float(doc.get("xi", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed spec document: {exc}") from exc


def spec_to_dict(spec: ProblemSpec, c0_guess: float | None = None) -> dict:
    return {
        "omega": list(spec.omega),
        "modes": [{"nu": list(nu), "re": v.real, "im": v.imag} for nu, v in spec.forcing.modes.items()],
        "f_average": spec.forcing.average,
        "g_poly": list(spec.g_poly),
        "c0_guess": spec.nonlinearity.c0 if c0_guess is None else c0_guess,
        "P": spec.nonlinearity.P,
        "xi": spec.forcing.xi,
    }


def load_spec(path: str | Path) -> ProblemSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
