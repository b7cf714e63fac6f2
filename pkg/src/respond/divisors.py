"""Small divisors, the propagator symbol D(eps, s) and complex-eps domains.

Lattice searches run over l1 balls and are exhaustive; the work is chunked by
the first ``d - 1`` coordinates so that only one line of the ball is ever held
in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np

from respond.errors import BudgetExceeded, EmptySupport, ZeroEps
from respond.problem import Mode, dot, l1

DEFAULT_BUDGET = 10**7


def ball_size(d: int, R: int) -> int:
    """Number of integer points with l1 norm <= R in dimension d."""
    return sum(2**k * comb(d, k) * comb(R, k) for k in range(min(d, R) + 1))


def _prefixes(d: int, R: int) -> Iterator[tuple[int, ...]]:
    if d == 0:
        yield ()
        return
    for c in range(-R, R + 1):
        for rest in _prefixes(d - 1, R - abs(c)):
            yield (c,) + rest


def ball_chunks(d: int, R: int, budget: int = DEFAULT_BUDGET) -> Iterator[np.ndarray]:
    """Yield the nonzero points of the l1 ball of radius R as integer arrays.

    Each chunk shares its first ``d - 1`` coordinates. Raises BudgetExceeded
    before yielding anything if the ball is larger than ``budget``.
    """
    if ball_size(d, R) > budget:
        raise BudgetExceeded(f"l1 ball of radius {R} in dimension {d} exceeds budget {budget}")
    for pre in _prefixes(d - 1, R):
        rem = R - l1(pre)
        last = np.arange(-rem, rem + 1)
        if not any(pre):
            last = last[last != 0]
        if last.size == 0:
            continue
        chunk = np.empty((last.size, d), dtype=np.int64)
        chunk[:, : d - 1] = pre
        chunk[:, d - 1] = last
        yield chunk


def _min_divisor(omega: Sequence[float], R: int, budget: int) -> tuple[float, Mode]:
    w = np.asarray(omega, dtype=float)
    best, arg = math.inf, None
    for chunk in ball_chunks(len(w), R, budget):
        vals = np.abs(chunk @ w)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, arg = float(vals[i]), tuple(int(c) for c in chunk[i])
    return best, arg


def alpha_n(omega: Sequence[float], n: int, budget: int = DEFAULT_BUDGET) -> float:
    """min |omega.nu| over 0 < |nu| <= 2**n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return _min_divisor(omega, 2**n, budget)[0]


def alpha_argmin(omega: Sequence[float], n: int, budget: int = DEFAULT_BUDGET) -> Mode:
    return _min_divisor(omega, 2**n, budget)[1]


def beta_with_flag(omega: Sequence[float], support: Sequence[Mode], n: int) -> tuple[float, bool]:
    """Like :func:`beta_n` but also reports whether the ball at scale n was empty.

    When no supported mode fits in the ball of radius ``2**n`` the minimum is
    taken at the first larger scale that contains one, and the flag is True.
    """
    if not support:
        raise EmptySupport("forcing has no nonzero modes")
    if n < 0:
        raise ValueError("n must be >= 0")
    nonzero = [nu for nu in support if any(nu)]
    if not nonzero:
        raise EmptySupport("forcing has no nonzero modes")
    radius = 2**n
    inside = [nu for nu in nonzero if l1(nu) <= radius]
    flagged = not inside
    if flagged:
        m = n
        while not inside:
            m += 1
            inside = [nu for nu in nonzero if l1(nu) <= 2**m]
    return min(abs(dot(omega, nu)) for nu in inside), flagged


def beta_n(omega: Sequence[float], support: Sequence[Mode], n: int) -> float:
    """min |omega.nu| over supported modes with 0 < |nu| <= 2**n."""
    return beta_with_flag(omega, support, n)[0]


def eps_n(omega: Sequence[float], support: Sequence[Mode], n: int) -> float:
    return math.log(1.0 / beta_n(omega, support, n)) / 2**n


def bruno_partial(omega: Sequence[float], N: int, budget: int = DEFAULT_BUDGET) -> float:
    """Partial Bryuno sum over scales 0..N."""
    if N < 0:
        raise ValueError("N must be >= 0")
    return math.fsum(math.log(1.0 / alpha_n(omega, n, budget)) / 2**n for n in range(N + 1))


@dataclass(frozen=True)
class DivisorRow:
    n: int
    alpha_n: float
    beta_n: float
    eps_n: float
    bruno_partial: float
    beta_flagged: bool = False


@dataclass
class DivisorProfile:
    rows: list[DivisorRow] = field(default_factory=list)

    def as_records(self) -> list[dict]:
        return [
            {
                "n": r.n,
                "alpha_n": r.alpha_n,
                "beta_n": r.beta_n,
                "eps_n": r.eps_n,
                "bruno_partial": r.bruno_partial,
            }
            for r in self.rows
        ]


def divisor_profile(
    omega: Sequence[float], support: Sequence[Mode], N: int, budget: int = DEFAULT_BUDGET
) -> DivisorProfile:
    rows = []
    terms: list[float] = []
    for n in range(N + 1):
        a = alpha_n(omega, n, budget)
        b, flagged = beta_with_flag(omega, support, n)
        terms.append(math.log(1.0 / a) / 2**n)
        rows.append(DivisorRow(n, a, b, math.log(1.0 / b) / 2**n, math.fsum(terms), flagged))
    return DivisorProfile(rows)


def estimate_C0(
    omega: Sequence[float], xi: float, N: int, budget: int = DEFAULT_BUDGET
) -> float:
    """Smallest C0 with C0 |omega.nu| >= exp(-xi |nu| / 16) for 0 < |nu| <= N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    w = np.asarray(omega, dtype=float)
    best = 0.0
    for chunk in ball_chunks(len(w), N, budget):
        div = np.abs(chunk @ w)
        norms = np.abs(chunk).sum(axis=1)
        with np.errstate(divide="ignore"):
            ratio = np.exp(-xi * norms / 16.0) / div
        best = max(best, float(ratio.max()))
    return best


# --- the symbol D and the eps domains ------------------------------------


def D(eps, s, a: float):
    """-eps s^2 + i s + eps a; vectorises over numpy inputs."""
    return -eps * s * s + 1j * s + eps * a


def in_C_R(eps: complex, R: float) -> bool:
    """Membership in the pair of disks |Re 1/eps| > 1/(2R)."""
    if eps == 0:
        raise ZeroEps("C_R membership is undefined at eps = 0")
    return abs((1.0 / complex(eps)).real) > 1.0 / (2.0 * R)


def in_Omega(eps: complex, B: float, eps0: float) -> bool:
    """Membership in {|Re eps| >= B (Im eps)^2, 0 < |eps| < 2 eps0}."""
    eps = complex(eps)
    r = abs(eps)
    return 0 < r < 2.0 * eps0 and abs(eps.real) >= B * eps.imag**2


def in_Omega_array(eps: np.ndarray, B: float, eps0: float) -> np.ndarray:
    r = np.abs(eps)
    return (r > 0) & (r < 2.0 * eps0) & (np.abs(eps.real) >= B * eps.imag**2)


@dataclass(frozen=True)
class DivisorFloor:
    """Lower bound |D(eps,s)| >= kappa0 max{min(1,s^2), |eps|^2} on Omega_{B,eps1}."""

    kappa0: float
    a: float
    B: float
    eps1: float


def floor_constant(a: float, B: float) -> float:
    a = abs(a)
    return min(1 / 8, B / 18, B / (8 * a), a / 8, a * B / 4, math.sqrt(a) / 2)


def _root_conditions_hold(a: float, ymax: float, samples: int = 4000) -> bool:
    """Smallness conditions on the roots of s + y a - y s^2 for 0 < y <= ymax."""
    y = np.geomspace(ymax * 1e-8, ymax, samples)
    disc = 1 + 4 * a * y * y
    if np.any(disc < 0):
        return False
    s2 = (1 + np.sqrt(disc)) / (2 * y)
    s1 = -a / s2
    ok1 = np.abs(s1 + a * y) <= abs(a) * y / 2
    ok2 = np.abs(s2 - 1 / y) <= 1 / (6 * y)
    ok3 = 18 * abs(a) * y * y <= 1
    return bool(np.all(ok1 & ok2 & ok3))


def lemma31_floor(a: float, B: float) -> DivisorFloor:
    """Floor constant and a validity radius ``eps1`` for the divisor bound.

    ``eps1`` starts at ``min(1/sqrt(18|a|), 1/(4|a|), 0.1) / 2`` and is halved
    until the root-location conditions hold for all |Im eps| < 2 eps1.
    """
    if a == 0:
        raise ValueError("a must be nonzero")
    if B <= 0:
        raise ValueError("B must be positive")
    eps1 = min(1 / math.sqrt(18 * abs(a)), 1 / (4 * abs(a)), 0.1) / 2
    while not _root_conditions_hold(a, 2 * eps1):
        eps1 /= 2
    return DivisorFloor(floor_constant(a, B), float(a), float(B), eps1)


def omega_samples(B: float, eps0: float, n_radii: int = 200, n_angles: int = 30) -> np.ndarray:
    """Points of Omega_{B,eps0}: the parabola boundary, the real axis and interior rays.

    Both half-planes and both signs of Im eps are covered.
    """
    r = np.geomspace(2 * eps0 * 1e-7, 2 * eps0 * (1 - 1e-9), n_radii)
    # boundary: x = B y^2 and x^2 + y^2 = r^2
    y_b = np.sqrt((-1 + np.sqrt(1 + 4 * B * B * r * r)) / (2 * B * B))
    x_b = B * y_b * y_b
    phi_b = np.arctan2(y_b, x_b)
    t = np.linspace(-1.0, 1.0, n_angles + 2)[1:-1]
    phi = phi_b[:, None] * t[None, :]
    right = np.concatenate([(r[:, None] * np.exp(1j * phi)).ravel(), x_b + 1j * y_b, x_b - 1j * y_b])
    pts = np.concatenate([right, -right])
    # interior rays close to the boundary can round to just outside it
    return pts[in_Omega_array(pts, B, eps0)]


def s_samples(a: float, n_linear: int = 2001, n_log: int = 200) -> np.ndarray:
    lin = np.linspace(-10.0, 10.0, n_linear)
    small = np.geomspace(1e-9, 10.0, n_log)
    special = np.array([0.0, math.sqrt(abs(a)), -math.sqrt(abs(a)), 1.0, -1.0])
    return np.unique(np.concatenate([lin, small, -small, special]))


@dataclass(frozen=True)
class FloorReport:
    violations: int
    min_ratio: float
    kappa0: float
    eps1: float
    samples: int

    def as_dict(self) -> dict:
        return {
            "violations": self.violations,
            "min_ratio": self.min_ratio,
            "kappa0": self.kappa0,
            "eps1": self.eps1,
        }


def verify_lemma31(
    a: float,
    B: float,
    eps_samples: np.ndarray | None = None,
    s_grid: np.ndarray | None = None,
    floor: DivisorFloor | None = None,
) -> FloorReport:
    """Check |D(eps,s)| >= kappa0 max{min(1,s^2),|eps|^2} on every (eps, s) pair.

    The default samples give about 12 000 eps values times 2 400 s values.
    The merge over chunks only takes counts and minima, so it is order
    independent.
    """
    floor = floor or lemma31_floor(a, B)
    if eps_samples is None:
        eps_samples = omega_samples(B, floor.eps1)
    if s_grid is None:
        s_grid = s_samples(a)
    eps_samples = np.asarray(eps_samples, dtype=complex)
    s_grid = np.asarray(s_grid, dtype=float)
    s_term = np.minimum(1.0, s_grid**2)
    violations = 0
    min_ratio = math.inf
    step = max(1, 2_000_000 // max(1, s_grid.size))
    for i in range(0, eps_samples.size, step):
        e = eps_samples[i : i + step, None]
        lhs = np.abs(D(e, s_grid[None, :], a))
        rhs = floor.kappa0 * np.maximum(s_term[None, :], np.abs(e) ** 2)
        ratio = lhs / rhs
        violations += int(np.count_nonzero(ratio < 1.0))
        min_ratio = min(min_ratio, float(ratio.min()))
    return FloorReport(violations, min_ratio, floor.kappa0, floor.eps1, eps_samples.size * s_grid.size)
