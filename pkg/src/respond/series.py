"""Coefficients of the response solution, by tree sums and by direct recursion.

Trigonometric polynomials are sparse maps ``{mode: complex}``.  Products are
exact sparse convolutions iterated in sorted key order, so every result is
bit-reproducible.

With ``u = sum_k mu^k u^(k)`` the recursion reads, for k >= 2,

    u^(k)_nu = pref(nu) * sum_p a_p [u^p]^(k-1)_nu,

where ``pref(nu) = -eps / D(eps, omega.nu)`` for nu != 0 and ``-1/a`` for
nu = 0, and ``[u^p]^(m)`` is the order-m part of the p-th power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from respond.divisors import D
from respond.errors import SingularPropagator
from respond.problem import Mode, ProblemSpec, dot, l1
from respond.trees import DEFAULT_TREE_BUDGET, TreeEnumerator, value

ModeMap = dict[Mode, complex]

DEFAULT_ORDER = 6


def convolve(a: Mapping[Mode, complex], b: Mapping[Mode, complex]) -> ModeMap:
    out: ModeMap = {}
    for ka in sorted(a):
        va = a[ka]
        for kb in sorted(b):
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0j) + va * b[kb]
    return dict(sorted(out.items()))


def add_into(acc: ModeMap, b: Mapping[Mode, complex], scale: complex = 1.0) -> None:
    for k in sorted(b):
        acc[k] = acc.get(k, 0j) + scale * b[k]


def l1_mass(m: Mapping[Mode, complex]) -> float:
    return math.fsum(abs(v) for v in m.values())


def _zero(d: int) -> Mode:
    return tuple([0] * d)


def _prefactor(spec: ProblemSpec, eps: complex, nu: Mode) -> complex:
    if not any(nu):
        return -1.0 / spec.a
    den = D(eps, dot(spec.omega, nu), spec.a)
    if den == 0:
        raise SingularPropagator(f"D(eps, omega.nu) = 0 at nu = {nu}")
    return -eps / den


@dataclass
class CoefficientTable:
    """``entries[k]`` maps modes to u^(k)_nu at a fixed eps; absent modes are zero."""

    eps: complex
    K: int
    entries: dict[int, ModeMap] = field(default_factory=dict)
    momentum_radius: int = 0

    def get(self, k: int, nu: Sequence[int]) -> complex:
        return self.entries.get(k, {}).get(tuple(nu), 0j)

    def order_max(self, k: int, weight_xi: float = 0.0) -> float:
        """max_nu |u^(k)_nu| e^{weight_xi |nu| / 2}."""
        sl = self.entries.get(k, {})
        return max((abs(v) * math.exp(weight_xi * l1(nu) / 2) for nu, v in sl.items()), default=0.0)

    def slice_mass(self, k: int) -> float:
        return l1_mass(self.entries.get(k, {}))


def coeff_via_recursion(spec: ProblemSpec, eps: complex, K: int = DEFAULT_ORDER) -> CoefficientTable:
    """u^(k)_nu for all k <= K by the Fourier-space recursion."""
    if K < 1:
        raise ValueError("K must be >= 1")
    eps = complex(eps)
    nl = spec.nonlinearity
    ps = [p for p in range(2, nl.P + 1) if nl.a_p(p) != 0]
    u: dict[int, ModeMap] = {}
    u[1] = {nu: eps * spec.f(nu) / _den(spec, eps, nu) for nu in spec.support}
    # powers[p][m] = order-m part of u^p
    powers: dict[int, dict[int, ModeMap]] = {1: {1: u[1]}}
    for p in ps:
        powers.setdefault(p, {})
    for k in range(2, K + 1):
        m = k - 1
        # extend the power tables to order m; u^(m) is already known
        powers[1][m] = u[m]
        for p in range(2, max(ps, default=1) + 1):
            lower = powers.setdefault(p - 1, {})
            acc: ModeMap = {}
            for j in range(1, m - (p - 1) + 1):
                left, right = u.get(j, {}), lower.get(m - j, {})
                if left and right:
                    add_into(acc, convolve(left, right))
            powers.setdefault(p, {})[m] = dict(sorted(acc.items()))
        rhs: ModeMap = {}
        for p in ps:
            add_into(rhs, powers[p][m], nl.a_p(p))
        u[k] = {nu: _prefactor(spec, eps, nu) * v for nu, v in sorted(rhs.items())}
    radius = max((l1(nu) for sl in u.values() for nu in sl), default=0)
    return CoefficientTable(eps=eps, K=K, entries=u, momentum_radius=radius)


def _den(spec: ProblemSpec, eps: complex, nu: Mode) -> complex:
    den = D(eps, dot(spec.omega, nu), spec.a)
    if den == 0:
        raise SingularPropagator(f"D(eps, omega.nu) = 0 at nu = {nu}")
    return den


def coeff_via_trees(
    spec: ProblemSpec,
    eps: complex,
    k: int,
    nu: Sequence[int],
    enumerator: TreeEnumerator | None = None,
) -> complex:
    """Ordered sum of tree values over T_{k,nu}."""
    en = enumerator or TreeEnumerator.for_spec(spec)
    total = 0j
    for tree in en.trees(k, tuple(nu)):
        total += value(tree, eps, spec)
    return total


def table_via_trees(
    spec: ProblemSpec, eps: complex, K: int = DEFAULT_ORDER, budget: int = DEFAULT_TREE_BUDGET
) -> CoefficientTable:
    """Same layout as :func:`coeff_via_recursion`, built from tree sums."""
    en = TreeEnumerator.for_spec(spec, budget)
    entries: dict[int, ModeMap] = {}
    for k in range(1, K + 1):
        entries[k] = {nu: coeff_via_trees(spec, eps, k, nu, en) for nu in sorted(en.reachable(k))}
    radius = max((l1(nu) for sl in entries.values() for nu in sl), default=0)
    return CoefficientTable(eps=complex(eps), K=K, entries=entries, momentum_radius=radius)


@dataclass
class ResponseSolution:
    """x(psi) = sum_nu X_nu e^{i nu.psi}; ``coeffs`` includes c0 in the zero mode."""

    spec: ProblemSpec
    eps: complex
    K: int
    coeffs: ModeMap

    @property
    def deviation(self) -> ModeMap:
        """Fourier coefficients of u = x - c0."""
        z = _zero(self.spec.d)
        out = dict(self.coeffs)
        out[z] = out.get(z, 0j) - self.spec.nonlinearity.c0
        return out

    def __call__(self, psi: Sequence[float]) -> complex:
        psi = np.asarray(psi, dtype=float)
        return complex(sum(v * np.exp(1j * float(np.dot(nu, psi))) for nu, v in self.coeffs.items()))

    def at_time(self, t: float) -> complex:
        return self(np.asarray(self.spec.omega) * t)


def assemble(table: CoefficientTable, spec: ProblemSpec, K: int | None = None) -> ResponseSolution:
    """Sum orders 1..K with mu = 1 and add c0 to the zero mode."""
    K = table.K if K is None else K
    if K > table.K:
        raise ValueError(f"table only holds orders up to {table.K}")
    z = _zero(spec.d)
    total: ModeMap = {z: complex(spec.nonlinearity.c0)}
    for k in range(1, K + 1):
        add_into(total, table.entries.get(k, {}))
    return ResponseSolution(spec, table.eps, K, dict(sorted(total.items())))


def residual_modes(sol: ResponseSolution, spec: ProblemSpec) -> ModeMap:
    """Fourier coefficients of eps x'' + x' + eps g(x) - eps f(omega t)."""
    eps = complex(sol.eps)
    u = sol.deviation
    nl = spec.nonlinearity
    z = _zero(spec.d)
    # g(c0 + u) = g0 + sum_p a_p u^p, by Horner over sparse maps
    g_of_x: ModeMap = {z: complex(nl.coeffs[-1])}
    for p in range(nl.P - 1, -1, -1):
        g_of_x = convolve(g_of_x, u)
        coef = nl.g0 if p == 0 else nl.a_p(p)
        g_of_x[z] = g_of_x.get(z, 0j) + coef
    out: ModeMap = {}
    for nu in sorted(set(u) | set(g_of_x) | set(spec.forcing.modes) | {z}):
        s = dot(spec.omega, nu)
        f_nu = spec.forcing.average if nu == z else spec.f(nu)
        out[nu] = (-eps * s * s + 1j * s) * u.get(nu, 0j) + eps * g_of_x.get(nu, 0j) - eps * f_nu
    return out


def residual(sol: ResponseSolution, spec: ProblemSpec) -> float:
    """l1 norm over modes of the ODE residual of a truncated solution."""
    return l1_mass(residual_modes(sol, spec))


def tail_mass(spec: ProblemSpec, eps: complex, K: int, extra: int = 3) -> float:
    """l1 mass of the orders K+1..K+extra, from the recursion."""
    table = coeff_via_recursion(spec, eps, K + extra)
    return math.fsum(table.slice_mass(k) for k in range(K + 1, K + extra + 1))


@dataclass(frozen=True)
class RealityReport:
    max_defect: float
    relative_defect: float
    worst: tuple[int, Mode] | None


def reality_check(table: CoefficientTable) -> RealityReport:
    """Largest |u^(k)_{-nu} - conj(u^(k)_nu)|, absolute and relative to the order's scale."""
    worst_abs, worst_rel, where = 0.0, 0.0, None
    for k in sorted(table.entries):
        sl = table.entries[k]
        scale = max((abs(v) for v in sl.values()), default=0.0)
        for nu, v in sl.items():
            partner = sl.get(tuple(-c for c in nu), 0j)
            defect = abs(partner - v.conjugate())
            rel = defect / scale if scale else 0.0
            if defect > worst_abs:
                worst_abs = defect
            if rel > worst_rel:
                worst_rel, where = rel, (k, nu)
    return RealityReport(worst_abs, worst_rel, where)
