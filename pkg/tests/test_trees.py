import math
from collections import defaultdict

import pytest
from hypothesis import given, settings, strategies as st

from respond.divisors import D, estimate_C0
from respond.errors import BudgetExceeded, ClassificationContradiction, SingularPropagator
from respond.problem import make_spec
from respond.trees import (
    LabelledTree,
    TreeEnumerator,
    check_lemma32,
    check_lemma35,
    classify,
    degree,
    enumerate_trees,
    divisor_violations,
    order,
    parse,
    validate_tree,
    value,
)

PM1 = [(1,), (-1,)]
GOLD = (1.0, 0.6180339887)


def generating_counts(support, branchings, K):
    """Tree counts from fixed-point iteration of U = mu (F + sum_p U^p).

    Polynomials are dicts {(k, nu): int}; no enumeration involved.
    """
    d = len(support[0])

    def mul(a, b):
        out = defaultdict(int)
        for (ka, na), va in a.items():
            for (kb, nb), vb in b.items():
                if ka + kb <= K:
                    out[(ka + kb, tuple(x + y for x, y in zip(na, nb)))] += va * vb
        return out

    U = {}
    for _ in range(K):
        new = defaultdict(int)
        for nu in support:
            new[(1, tuple(nu))] += 1
        power = dict(U)
        for p in range(2, max(branchings, default=1) + 1):
            power = mul(power, U)
            if p in branchings:
                for (k, nu), v in power.items():
                    if k + 1 <= K:
                        new[(k + 1, nu)] += v
        U = dict(new)
    return U


def mirror(t):
    if t[0] == "e":
        return ("e", tuple(-c for c in t[1]))
    return ("v", tuple(mirror(c) for c in t[1]))


class TestEncoding:
    def test_roundtrip(self):
        for enc in ["<1>", "0[<1> <-1>]", "1[<1> 1[<1> <-1> <1>]]", "1[<1,0> 0[<0,1> <0,-1>]]"]:
            assert parse(enc).encoding == enc

    def test_degree_label_must_match(self):
        with pytest.raises(ValueError):
            parse("1[<1> <-1>]")

    def test_garbage(self):
        with pytest.raises(ValueError):
            parse("0[<1> x]")


class TestEnumeration:
    def test_order_one(self):
        assert [t.encoding for t in enumerate_trees(1, (1,), PM1, 2)] == ["<1>"]
        assert enumerate_trees(1, (2,), PM1, 2) == []

    @pytest.mark.parametrize("nu", [(0,), (1,), (2,), (-3,)])
    def test_order_two_is_empty(self, nu):
        assert enumerate_trees(2, nu, PM1, 5) == []

    def test_order_three_zero_momentum(self):
        trees = enumerate_trees(3, (0,), PM1, 2)
        assert [t.encoding for t in trees] == ["0[<-1> <1>]", "0[<1> <-1>]"]
        assert generating_counts(PM1, {2}, 3)[(3, (0,))] == 2

    def test_counts_match_generating_function(self):
        support = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        for branchings in ({2}, {2, 3}, {3}):
            en = TreeEnumerator(support, branchings)
            oracle = generating_counts(support, branchings, 6)
            for k in range(1, 7):
                for nu in en.reachable(k) | {nu for (kk, nu) in oracle if kk == k}:
                    assert en.count(k, nu) == oracle.get((k, nu), 0)
                    assert len(en.trees(k, nu)) == oracle.get((k, nu), 0)

    def test_canonical_and_distinct(self, wide_spec):
        en = TreeEnumerator.for_spec(wide_spec)
        trees = en.trees(6, (0,))
        encs = [t.encoding for t in trees]
        assert encs == sorted(encs)
        assert len(set(encs)) == len(encs)
        assert TreeEnumerator.for_spec(wide_spec).trees(6, (0,)) == trees

    def test_every_tree_revalidates(self, wide_spec):
        en = TreeEnumerator.for_spec(wide_spec)
        for k in range(1, 8):
            for nu in en.reachable(k):
                for t in en.trees(k, nu):
                    assert validate_tree(t, PM1, 8) == []
                    assert order(t) == k and t.momentum == nu

    def test_budget(self):
        en = TreeEnumerator(PM1, range(2, 9), budget=10)
        with pytest.raises(BudgetExceeded):
            en.trees(7, (1,))

    def test_branching_cap(self):
        # with P = 2 every internal node is binary so orders are odd
        en = TreeEnumerator(PM1, [2])
        assert all(not en.reachable(k) for k in (2, 4, 6))

    def test_validate_catches_bad_labels(self):
        t = LabelledTree(("v", (("e", (1,)),)))
        assert any("p_v" in p for p in validate_tree(t))
        t2 = LabelledTree(("v", (("e", (1,)), ("e", (1,)))))
        assert any("outside support" in p for p in validate_tree(t2, [(2,)]))


class TestDegreeOrder:
    def test_examples(self):
        assert (degree(parse("<1>")), order(parse("<1>"))) == (1, 1)
        assert degree(parse("0[<1> <-1>]")) == 2
        assert degree(parse("1[<1> <1>]")) == 3


class TestValue:
    def test_single_end_node(self, cosine_spec):
        eps = 0.07 + 0.02j
        assert value(parse("<1>"), eps, cosine_spec) == eps * 0.5 / D(eps, 1.0, 1.0)

    def test_order_three_hand_product(self, cosine_spec):
        eps = 0.05
        # node factors -a2, eps f1, eps f-1; propagators 1/a, 1/D(eps,1), 1/D(eps,-1)
        hand = (-1.0 / 1.0) * eps**2 * 0.25 / (D(eps, 1.0, 1.0) * D(eps, -1.0, 1.0))
        for enc in ("0[<1> <-1>]", "0[<-1> <1>]"):
            assert value(parse(enc), eps, cosine_spec) == pytest.approx(hand, rel=1e-15)

    def test_mirror_conjugate_for_real_eps(self, golden_spec):
        en = TreeEnumerator.for_spec(golden_spec)
        for eps in (0.03, -0.11):
            for k in (1, 3, 4, 5):
                for nu in sorted(en.reachable(k)):
                    for t in en.trees(k, nu):
                        m = LabelledTree(mirror(t.nested))
                        assert value(m, eps, golden_spec) == pytest.approx(
                            value(t, eps, golden_spec).conjugate(), rel=1e-14, abs=0
                        )

    def test_singular_propagator(self):
        spec = make_spec([1.0], {(2,): 0.5, (-2,): 0.5}, [0.0, 2.0, 1.0])
        # a = 2: D(i t, 2) = i (2 - 2 t) vanishes at t = 1
        with pytest.raises(SingularPropagator):
            value(parse("<2>"), 1j, spec)


class TestClassification:
    def test_zero_momentum_root(self):
        t = parse("0[<1> <-1>]")
        c = classify(t, (1.0,), 1.0, estimate_C0((1.0,), 1.0, 4))
        assert c.V2 == {0} and c.V2bar == frozenset() and c.L0 == frozenset()
        assert c.r[0] == 2 and c.s[0] == 0

    def test_nonzero_momentum_root(self):
        t = parse("1[<1> <1>]")
        c = classify(t, (1.0,), 1.0, estimate_C0((1.0,), 1.0, 4))
        assert c.V2bar == {0} and c.L1 == {0} and c.L0 == frozenset()
        assert c.m[0] == (2,) and c.mu[0] == 2

    def test_v3bar_instance(self):
        # root: one end child (0,1) and one internal child with momentum (1,0)
        t = parse("1[<0,1> 1[<1,1> <0,-1>]]")
        C0 = estimate_C0(GOLD, 1.0, 8)
        c = classify(t, GOLD, 1.0, C0)
        assert c.V3bar == {0}
        inner = c.inner_line[0]
        big = max(abs(1.0 + GOLD[1]), abs(1.0))  # |omega.(1,1)| vs |omega.(1,0)|
        assert 2 * C0 * big >= math.exp(-c.mu[0] / 16)
        assert inner in c.L1 or 0 in c.L1
        assert divisor_violations(t, c, GOLD, 1.0, C0) == []
        assert c.V0 | c.V1 == c.V and not (c.V0 & c.V1)
        assert c.V1bar <= c.V1

    def test_contradiction_with_tiny_C0(self):
        t = parse("1[<0,1> 1[<1,1> <0,-1>]]")
        with pytest.raises(ClassificationContradiction):
            classify(t, GOLD, 1.0, 1e-6)

    def test_internal_line_bound_chain(self):
        # order-5 chain of V3bar nodes
        t = parse("1[<1> 1[<1> 1[<1> <1>]]]")
        c = classify(t, (1.0,), 1.0, estimate_C0((1.0,), 1.0, 8))
        assert c.V3bar == {0, 2}
        assert check_lemma35(t, c)
        assert 4 * len(c.L0) <= 3 * len(c.E) - 4

    def test_tree_inequalities_small(self):
        for enc in ("<1>", "0[<1> <-1>]", "1[<1> <1>]"):
            t = parse(enc)
            c = classify(t, (1.0,), 1.0, 1.0)
            assert check_lemma32(t) and check_lemma35(t, c)

    def test_sweep_golden(self, golden_spec):
        en = TreeEnumerator.for_spec(golden_spec)
        C0 = estimate_C0(golden_spec.omega, 1.0, 8)
        n = 0
        for k in range(1, 8):
            for nu in en.reachable(k):
                for t in en.trees(k, nu):
                    c = classify(t, golden_spec.omega, 1.0, C0)
                    assert check_lemma32(t)
                    assert check_lemma35(t, c)
                    assert divisor_violations(t, c, golden_spec.omega, 1.0, C0) == []
                    n += 1
        assert n > 5000


@st.composite
def random_trees(draw, depth=4):
    support = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)]

    def node(level):
        if level == 0 or draw(st.booleans()):
            return ("e", draw(st.sampled_from(support)))
        p = draw(st.integers(2, 3))
        return ("v", tuple(node(level - 1) for _ in range(p)))

    return LabelledTree(node(depth))


class TestRandomTrees:
    @settings(max_examples=300, deadline=None)
    @given(random_trees())
    def test_invariants(self, t):
        assert validate_tree(t) == []
        assert check_lemma32(t)
        N = 2 * sum(abs(c) for n in t.end_nodes() for c in n.mode)
        C0 = estimate_C0(GOLD, 1.0, max(N, 1))
        c = classify(t, GOLD, 1.0, C0)
        assert c.V == c.V0 | c.V1 and not (c.V0 & c.V1)
        assert c.V1bar == c.V2bar | c.V3bar and c.V1bar <= c.V1
        assert c.L0 == c.L_int - c.L1
        for v in c.V:
            assert c.r[v] + c.s[v] == t.nodes[v].p
        assert check_lemma35(t, c)
        assert divisor_violations(t, c, GOLD, 1.0, C0) == []
