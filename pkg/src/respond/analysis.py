"""Empirical checks of the coefficient bounds and of the analyticity domain.

Everything here is a finite-order proxy.  Convergence is judged by the
geometric growth rate of ``M_k = max_nu |u^(k)_nu|`` fitted over the upper half
of the computed orders; a rate below one counts as a pass.  Fitting over a
window rather than comparing consecutive orders matters because many orders
vanish identically (e.g. all even orders for a quadratic g and a single
harmonic) and the surviving ones cycle with a period of several orders.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from respond.divisors import floor_constant
from respond.errors import InsufficientData, SingularPropagator
from respond.problem import ProblemSpec
from respond.series import CoefficientTable, coeff_via_recursion

DEFAULT_SCAN_ORDER = 12
DEFAULT_ANGLES = 64
MIN_FIT_POINTS = 4
BELOW_ONE_TOL = 1e-2


def default_radii(n: int = 60, lo: float = 1e-4, hi: float = 10.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- growth-rate proxy --------------------------------------------------------


def order_maxima(table: CoefficientTable, xi: float = 0.0) -> list[tuple[int, float]]:
    """(k, max_nu |u^(k)_nu| e^{xi |nu|/2}) for the nonzero orders."""
    out = []
    for k in range(1, table.K + 1):
        m = table.order_max(k, xi)
        if m > 0:
            out.append((k, m))
    return out


def growth_rate(table: CoefficientTable) -> float | None:
    """exp of the least-squares slope of log M_k against k over orders k >= K/2.

    Returns None when fewer than two nonzero orders fall in the window, which
    happens for linear g (the series stops at first order).
    """
    pts = [(k, m) for k, m in order_maxima(table) if k >= table.K / 2]
    if len(pts) < 2:
        return None
    k = np.array([p[0] for p in pts], dtype=float)
    y = np.log([p[1] for p in pts])
    slope = np.polyfit(k, y, 1)[0]
    return float(np.exp(slope))


def proxy_passes(spec: ProblemSpec, eps: complex, K: int) -> bool:
    """Finite-order convergence proxy at a single eps."""
    try:
        table = coeff_via_recursion(spec, eps, K)
    except SingularPropagator:
        return False
    values = [v for sl in table.entries.values() for v in sl.values()]
    if not all(np.isfinite(v) for v in values):
        return False
    rate = growth_rate(table)
    return True if rate is None else rate < 1.0


def ray_radius(
    spec: ProblemSpec, arg_eps: float, K: int = DEFAULT_SCAN_ORDER, radii: Sequence[float] | None = None
) -> float:
    """Largest grid radius r such that the proxy passes at every grid point up to r.

    Heuristic and truncation limited; 0 if the smallest radius already fails.
    """
    if K < 4:
        raise ValueError("K must be >= 4")
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    direction = complex(math.cos(arg_eps), math.sin(arg_eps))
    best = 0.0
    for r in radii:
        if not proxy_passes(spec, r * direction, K):
            break
        best = float(r)
    return best


def parabola_points(B: float, r: float) -> list[complex]:
    """The four points with |eps| = r on the curves |Re eps| = B (Im eps)^2."""
    y = math.sqrt((-1 + math.sqrt(1 + 4 * B * B * r * r)) / (2 * B * B))
    x = B * y * y
    return [complex(x, y), complex(x, -y), complex(-x, y), complex(-x, -y)]


def boundary_radius(
    spec: ProblemSpec, B: float, K: int = DEFAULT_SCAN_ORDER, radii: Sequence[float] | None = None
) -> float:
    """Largest grid radius up to which the proxy passes on the parabola boundary."""
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    best = 0.0
    for r in radii:
        if not all(proxy_passes(spec, e, K) for e in parabola_points(B, float(r))):
            break
        best = float(r)
    return best


@dataclass
class DomainScan:
    rays: list[tuple[float, float]] = field(default_factory=list)
    B_grid: list[tuple[float, float]] = field(default_factory=list)
    alpha_hat: float = math.nan
    alpha_band: tuple[float, float] = (math.nan, math.nan)
    K: int = DEFAULT_SCAN_ORDER

    @property
    def eps0_nondecreasing(self) -> bool:
        e = [v for _, v in self.B_grid]
        return all(b >= a for a, b in zip(e, e[1:]))


def scan_rays(
    spec: ProblemSpec,
    K: int = DEFAULT_SCAN_ORDER,
    n_angles: int = DEFAULT_ANGLES,
    radii: Sequence[float] | None = None,
    threads: int = 1,
) -> DomainScan:
    """Ray radii at ``n_angles`` equally spaced arguments covering [0, 2 pi)."""
    args = [2 * math.pi * j / n_angles for j in range(n_angles)]
    fn = partial(_ray_task, spec, K, None if radii is None else tuple(radii))
    radii_out = _pmap(fn, args, threads)
    return DomainScan(rays=list(zip(args, radii_out)), K=K)


def _ray_task(spec, K, radii, arg):
    return ray_radius(spec, arg, K, radii)


def _boundary_task(spec, K, radii, B):
    return boundary_radius(spec, B, K, radii) / 2


def scan_eps0_of_B(
    spec: ProblemSpec,
    B_grid: Sequence[float],
    K: int = DEFAULT_SCAN_ORDER,
    radii: Sequence[float] | None = None,
    threads: int = 1,
) -> DomainScan:
    """eps0(B) from boundary scans and the log-log fit of eps0 against B.

    Omega_{eps0,B} is cut at |eps| < 2 eps0, so eps0 is half the boundary
    radius.  ``alpha_hat`` is the fitted exponent with a 95% band.
    """
    B_grid = [float(b) for b in B_grid]
    if any(b <= 0 for b in B_grid):
        raise ValueError("B values must be positive")
    fn = partial(_boundary_task, spec, K, None if radii is None else tuple(radii))
    eps0 = _pmap(fn, B_grid, threads)
    pairs = list(zip(B_grid, eps0))
    good = [(b, e) for b, e in pairs if e > 0]
    if len({b for b, _ in good}) < MIN_FIT_POINTS:
        raise InsufficientData(f"need {MIN_FIT_POINTS} B values with positive eps0, got {len(good)}")
    fit = stats.linregress(np.log([b for b, _ in good]), np.log([e for _, e in good]))
    half = 1.96 * fit.stderr
    return DomainScan(B_grid=pairs, alpha_hat=float(fit.slope), alpha_band=(fit.slope - half, fit.slope + half), K=K)


# --- bound fit ------------------------------------------------------------------


@dataclass
class BoundFit:
    xi: float
    A1: float
    kappa: float
    growth: float  # fitted per-order factor; A1 = growth * kappa
    eps_exponent: float
    orders: tuple[int, ...]
    residuals: list[float]
    per_order_exponent: dict[int, float]
    degenerate: bool = False
    below_one: bool = False  # some order decays slower than |eps|^1: indicates a bug

    def as_dict(self) -> dict:
        return {
            "A1": self.A1,
            "eps_exponent": self.eps_exponent,
            "residuals": list(self.residuals),
            "growth": self.growth,
            "kappa": self.kappa,
            "per_order_exponent": {str(k): v for k, v in self.per_order_exponent.items()},
            "degenerate": self.degenerate,
            "below_one": self.below_one,
        }


def fit_bound(tables: Sequence[CoefficientTable], xi: float, kappa: float | None = None, a: float = 1.0, B: float = 1.0) -> BoundFit:
    """Fit log(max_nu |u^(k)_nu| e^{xi|nu|/2}) = c + k log(growth) + eta log|eps|.

    ``kappa`` defaults to the divisor floor constant for (a, B), so that the
    reported ``A1 = growth * kappa`` is on the scale of ``A1^k kappa^-k``.
    """
    kappa = floor_constant(a, B) if kappa is None else kappa
    rows = []
    for t in tables:
        if t.eps == 0:
            continue
        for k, m in order_maxima(t, xi):
            rows.append((k, math.log(abs(t.eps)), math.log(m)))
    if len(rows) < MIN_FIT_POINTS:
        raise InsufficientData(f"need at least {MIN_FIT_POINTS} nonzero (k, eps) samples, got {len(rows)}")
    k = np.array([r[0] for r in rows], dtype=float)
    le = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    orders = tuple(sorted(set(int(x) for x in k)))

    per_order: dict[int, float] = {}
    for kk in orders:
        sel = k == kk
        if len(set(le[sel])) >= 2:
            per_order[kk] = float(np.polyfit(le[sel], y[sel], 1)[0])

    degenerate = len(orders) < 2
    if len(set(le)) < 2:
        raise InsufficientData("need at least two distinct |eps| values")
    if degenerate:
        X = np.column_stack([np.ones_like(le), le])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        growth, eta = 1.0, float(coef[1])
        res = y - X @ coef
    else:
        X = np.column_stack([np.ones_like(k), k, le])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        growth, eta = float(np.exp(coef[1])), float(coef[2])
        res = y - X @ coef
    # O(eps) curvature of log|1/D| makes finite-range slopes dip slightly below 1
    below = any(v < 1 - BELOW_ONE_TOL for v in per_order.values())
    return BoundFit(
        xi=xi,
        A1=growth * kappa,
        kappa=kappa,
        growth=growth,
        eps_exponent=eta,
        orders=orders,
        residuals=[float(x) for x in res],
        per_order_exponent=per_order,
        degenerate=degenerate,
        below_one=below,
    )


def growth_constant(table: CoefficientTable) -> float:
    """Smallest C with max_nu |u^(k)_nu| <= C^k |eps| for every computed order."""
    e = abs(table.eps)
    if e == 0:
        return 0.0
    return max(((m / e) ** (1.0 / k) for k, m in order_maxima(table)), default=0.0)
