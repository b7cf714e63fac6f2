import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from respond.divisors import D
from respond.errors import SingularPropagator
from respond.problem import make_spec
from respond.series import (
    assemble,
    coeff_via_recursion,
    coeff_via_trees,
    convolve,
    reality_check,
    residual,
    residual_modes,
    table_via_trees,
    tail_mass,
)
from respond.trees import TreeEnumerator


def hand_u3_zero(eps, a=1.0, a2=1.0, f1=0.5, fm1=0.5):
    return -2 * a2 * eps**2 * f1 * fm1 / (a * D(eps, 1.0, a) * D(eps, -1.0, a))


@pytest.fixture(scope="module")
def linear_spec():
    return make_spec([1.0], {(1,): 0.5, (-1,): 0.5, (3,): 0.25j, (-3,): -0.25j}, [0.0, 2.0])


class TestConvolve:
    def test_small(self):
        a = {(1,): 1.0, (-1,): 2.0}
        b = {(1,): 3.0, (0,): 1.0}
        assert convolve(a, b) == {(-1,): 2.0, (0,): 6.0, (1,): 1.0, (2,): 3.0}

    @settings(max_examples=50)
    @given(
        st.dictionaries(st.tuples(st.integers(-3, 3)), st.floats(-2, 2), max_size=5),
        st.dictionaries(st.tuples(st.integers(-3, 3)), st.floats(-2, 2), max_size=5),
    )
    def test_matches_polynomial_product(self, a, b):
        # shift exponents by 3 and compare with numpy's direct convolution
        va = np.zeros(7)
        vb = np.zeros(7)
        for (k,), v in a.items():
            va[k + 3] = v
        for (k,), v in b.items():
            vb[k + 3] = v
        dense = np.convolve(va, vb)
        out = convolve(a, b)
        for i, v in enumerate(dense):
            assert out.get((i - 6,), 0j) == pytest.approx(v, abs=1e-12)


class TestRecursion:
    def test_first_order(self, cosine_spec):
        eps = 0.05 + 0.01j
        t = coeff_via_recursion(cosine_spec, eps, 1)
        assert t.get(1, (1,)) == eps * 0.5 / D(eps, 1.0, 1.0)
        assert t.get(1, (0,)) == 0

    def test_order_two_vanishes(self, golden_spec):
        t = coeff_via_recursion(golden_spec, 0.1, 4)
        assert t.entries[2] == {}
        assert t.get(1, (0, 0)) == 0

    def test_u3_hand_formula(self, cosine_spec):
        for eps in (0.05, 1e-3, -0.2, 0.04 + 0.1j):
            got = coeff_via_recursion(cosine_spec, eps, 3).get(3, (0,))
            assert abs(got - hand_u3_zero(eps)) <= 1e-12 * abs(hand_u3_zero(eps))

    def test_linear_g_stops_at_first_order(self, linear_spec):
        t = coeff_via_recursion(linear_spec, 0.1, 6)
        assert all(t.entries[k] == {} for k in range(2, 7))

    def test_momentum_support(self, golden_spec):
        t = coeff_via_recursion(golden_spec, 0.07, 7)
        for k, sl in t.entries.items():
            assert all(sum(map(abs, nu)) <= k * golden_spec.forcing.max_norm for nu in sl)

    def test_singular(self):
        spec = make_spec([1.0], {(2,): 0.5, (-2,): 0.5}, [0.0, 2.0, 1.0])
        with pytest.raises(SingularPropagator):
            coeff_via_recursion(spec, 1j, 3)

    def test_deterministic(self, golden_spec):
        a = coeff_via_recursion(golden_spec, 0.05 + 0.02j, 7)
        b = coeff_via_recursion(golden_spec, 0.05 + 0.02j, 7)
        assert a.entries == b.entries


class TestOracleEquivalence:
    @pytest.mark.parametrize("eps", [1e-3, 0.05, -0.2, 0.04 + 0.1j, 0.3 - 0.05j])
    def test_d1(self, cosine_spec, eps):
        self._compare(cosine_spec, eps, 6)

    @pytest.mark.parametrize("eps", [1e-3, 0.05, -0.2, 0.04 + 0.1j])
    def test_d2(self, golden_spec, eps):
        self._compare(golden_spec, eps, 6)

    def test_wide_branching(self, wide_spec):
        self._compare(wide_spec, 0.08 - 0.01j, 7)

    @staticmethod
    def _compare(spec, eps, K):
        rec = coeff_via_recursion(spec, eps, K)
        tre = table_via_trees(spec, eps, K)
        for k in range(1, K + 1):
            scale = max(rec.order_max(k), tre.order_max(k))
            for nu in set(rec.entries[k]) | set(tre.entries[k]):
                assert abs(rec.get(k, nu) - tre.get(k, nu)) <= 1e-10 * max(scale, 1e-300)

    def test_single_coefficient(self, cosine_spec):
        en = TreeEnumerator.for_spec(cosine_spec)
        eps = 0.05
        assert coeff_via_trees(cosine_spec, eps, 3, (0,), en) == pytest.approx(hand_u3_zero(eps), rel=1e-12)
        assert coeff_via_trees(cosine_spec, eps, 2, (0,), en) == 0
        assert coeff_via_trees(cosine_spec, eps, 1, (5,), en) == 0


class TestAssembleResidual:
    def test_first_order_solution(self, cosine_spec):
        eps = 0.02
        t = coeff_via_recursion(cosine_spec, eps, 1)
        sol = assemble(t, cosine_spec)
        u1 = t.get(1, (1,))
        for time in (0.0, 0.7, 2.1):
            expected = cosine_spec.nonlinearity.c0 + 2 * (u1 * np.exp(1j * time)).real
            assert sol.at_time(time) == pytest.approx(expected, abs=1e-15)

    def test_eps_zero(self, golden_spec):
        t = coeff_via_recursion(golden_spec, 0.0, 5)
        sol = assemble(t, golden_spec)
        assert all(v == 0 for nu, v in sol.coeffs.items() if any(nu))
        assert residual(sol, golden_spec) == 0.0

    def test_linear_exact(self, linear_spec):
        for eps in (0.3, 0.01 + 0.02j):
            sol = assemble(coeff_via_recursion(linear_spec, eps, 1), linear_spec)
            assert residual(sol, linear_spec) <= 1e-15

    def test_residual_direct_quadrature(self, cosine_spec):
        # evaluate the ODE residual on a time grid and compare its Fourier data
        eps = 0.01
        sol = assemble(coeff_via_recursion(cosine_spec, eps, 5), cosine_spec)
        n = 64
        ts = 2 * np.pi * np.arange(n) / n
        X = np.array([sol.at_time(t) for t in ts])
        dX = np.array([sum(1j * nu[0] * v * np.exp(1j * nu[0] * t) for nu, v in sol.coeffs.items()) for t in ts])
        ddX = np.array([sum(-(nu[0] ** 2) * v * np.exp(1j * nu[0] * t) for nu, v in sol.coeffs.items()) for t in ts])
        R = eps * ddX + dX + eps * (X + X**2) - eps * np.cos(ts)
        modes = residual_modes(sol, cosine_spec)
        fft = np.fft.fft(R) / n
        for (k,), v in modes.items():
            assert fft[k % n] == pytest.approx(v, abs=1e-16)

    def test_residual_vs_tail(self, cosine_spec):
        eps = 1e-3
        sol = assemble(coeff_via_recursion(cosine_spec, eps, 5), cosine_spec)
        assert residual(sol, cosine_spec) <= 10 * tail_mass(cosine_spec, eps, 5)

    def test_residual_decreases(self, golden_spec):
        r = [residual(assemble(coeff_via_recursion(golden_spec, e, 5), golden_spec), golden_spec) for e in (0.02, 0.01, 0.005)]
        assert r[0] > r[1] > r[2]


class TestReality:
    def test_real_eps(self, golden_spec, cosine_spec):
        for spec in (golden_spec, cosine_spec):
            rep = reality_check(coeff_via_recursion(spec, 0.05, 7))
            assert rep.relative_defect <= 1e-13

    def test_first_order_exact(self, cosine_spec):
        t = coeff_via_recursion(cosine_spec, 0.05, 1)
        assert t.get(1, (-1,)) == t.get(1, (1,)).conjugate()

    def test_defect_grows_off_axis(self, cosine_spec):
        defects = [reality_check(coeff_via_recursion(cosine_spec, 0.1 + 1j * y, 5)).max_defect for y in (0.0, 1e-4, 1e-3, 1e-2)]
        assert defects[0] <= 1e-17
        assert defects == sorted(defects)
        # continuity: the defect is linear in the imaginary part near the axis
        assert defects[1] <= 2e-4
        assert 5 < defects[2] / defects[1] < 20
