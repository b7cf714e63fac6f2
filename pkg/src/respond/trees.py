"""Labelled rooted plane trees, their enumeration, values and classification.

A tree is built from nested tuples during enumeration (``("e", mode)`` for an
end node, ``("v", children)`` for an internal node) and wrapped in a
:class:`LabelledTree`, which flattens it into node records.  Every line is
identified with the node it exits, so line ids and node ids coincide; the root
line exits the root node (id 0).

Sibling order matters: two trees differing only by a permutation of children
are distinct, which accounts for the multinomial factors of the expansion
without explicit symmetry factors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterator, Sequence

from respond.divisors import D
from respond.errors import BudgetExceeded, ClassificationContradiction, SingularPropagator
from respond.problem import Mode, ProblemSpec, dot, l1

DEFAULT_TREE_BUDGET = 2_000_000
# relative rounding slack for divisor inequalities whose two sides are computed
# through different float expressions
CHECK_RTOL = 1e-12

Nested = tuple


def _add(a: Mode, b: Mode) -> Mode:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Mode, b: Mode) -> Mode:
    return tuple(x - y for x, y in zip(a, b))


def _nested_momentum(t: Nested) -> Mode:
    if t[0] == "e":
        return t[1]
    moms = [_nested_momentum(c) for c in t[1]]
    out = moms[0]
    for m in moms[1:]:
        out = _add(out, m)
    return out


def _fmt_mode(nu: Mode) -> str:
    return ",".join(str(c) for c in nu)


@dataclass(frozen=True)
class NodeRecord:
    id: int
    parent: int | None
    children: tuple[int, ...]
    mode: Mode | None  # end nodes only
    degree: int | None  # internal nodes only
    momentum: Mode  # of the line exiting this node

    @property
    def is_end(self) -> bool:
        return self.mode is not None

    @property
    def p(self) -> int:
        return len(self.children)


class LabelledTree:
    """Flattened labelled tree. Node ids follow pre-order, root first."""

    def __init__(self, nested: Nested):
        self.nested = nested
        records: list[NodeRecord] = []
        self._flatten(nested, None, records)
        self.nodes: tuple[NodeRecord, ...] = tuple(sorted(records, key=lambda r: r.id))
        self.encoding = encode(nested)

    def _flatten(self, t: Nested, parent: int | None, out: list) -> int:
        my_id = len(out)
        out.append(None)  # reserve the pre-order slot
        if t[0] == "e":
            out[my_id] = NodeRecord(my_id, parent, (), tuple(t[1]), None, tuple(t[1]))
            return my_id
        kids = tuple(self._flatten(c, my_id, out) for c in t[1])
        mom = out[kids[0]].momentum
        for k in kids[1:]:
            mom = _add(mom, out[k].momentum)
        deg = 0 if not any(mom) else 1
        out[my_id] = NodeRecord(my_id, parent, kids, None, deg, mom)
        return my_id

    @property
    def root(self) -> NodeRecord:
        return self.nodes[0]

    @property
    def momentum(self) -> Mode:
        return self.root.momentum

    def postorder(self) -> list[NodeRecord]:
        out: list[NodeRecord] = []

        def visit(i: int) -> None:
            for c in self.nodes[i].children:
                visit(c)
            out.append(self.nodes[i])

        visit(0)
        return out

    def end_nodes(self) -> list[NodeRecord]:
        return [n for n in self.nodes if n.is_end]

    def internal_nodes(self) -> list[NodeRecord]:
        return [n for n in self.nodes if not n.is_end]

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelledTree) and self.encoding == other.encoding

    def __hash__(self) -> int:
        return hash(self.encoding)

    def __repr__(self) -> str:
        return f"LabelledTree({self.encoding!r})"


def encode(t: Nested) -> str:
    """Depth-first parenthesisation: ``<n1,..>`` for end nodes, ``d[...]`` for internal ones."""
    if t[0] == "e":
        return "<" + _fmt_mode(t[1]) + ">"
    deg = 1 if any(_nested_momentum(t)) else 0
    return f"{deg}[" + " ".join(encode(c) for c in t[1]) + "]"


_TOKEN = re.compile(r"\s*(<[-0-9,]*>|[01]\[|\])")


def parse(encoding: str) -> LabelledTree:
    """Inverse of :func:`encode`. Degree labels are re-derived and must agree."""
    tokens = _TOKEN.findall(encoding)
    if "".join(tokens).replace(" ", "") != encoding.replace(" ", ""):
        raise ValueError(f"cannot parse tree encoding {encoding!r}")
    pos = 0

    def node() -> Nested:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok.startswith("<"):
            return ("e", tuple(int(c) for c in tok[1:-1].split(",")))
        kids = []
        while tokens[pos] != "]":
            kids.append(node())
        pos += 1
        return ("v", tuple(kids))

    nested = node()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {encoding!r}")
    tree = LabelledTree(nested)
    if tree.encoding != re.sub(r"\s+", " ", encoding.strip()):
        raise ValueError(f"degree labels in {encoding!r} contradict momenta")
    return tree


def order(tree: LabelledTree) -> int:
    return len(tree.nodes)


def degree(tree: LabelledTree) -> int:
    """|E| + |V_1|."""
    return sum(1 for n in tree.nodes if n.is_end or n.degree == 1)


# --- enumeration ------------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class TreeEnumerator:
    """Memoised generator of the tree families T_{k,nu}.

    ``branchings`` lists the admissible numbers of children; with a polynomial
    g of degree P these are the p in 2..P with a_p != 0.
    """

    def __init__(self, support: Sequence[Mode], branchings: Sequence[int], budget: int = DEFAULT_TREE_BUDGET):
        self.support = tuple(sorted(tuple(nu) for nu in support if any(nu)))
        if not self.support:
            raise ValueError("support must contain a nonzero mode")
        self.d = len(self.support[0])
        self.branchings = tuple(sorted(p for p in set(branchings) if p >= 2))
        self.budget = budget
        self._reach: dict[int, frozenset[Mode]] = {}
        self._counts: dict[tuple[int, Mode], int] = {}
        self._trees: dict[tuple[int, Mode], tuple[Nested, ...]] = {}

    @classmethod
    def for_spec(cls, spec: ProblemSpec, budget: int = DEFAULT_TREE_BUDGET) -> "TreeEnumerator":
        nl = spec.nonlinearity
        ps = [p for p in range(2, nl.P + 1) if nl.a_p(p) != 0]
        return cls(spec.support, ps, budget)

    def reachable(self, k: int) -> frozenset[Mode]:
        """Momenta nu for which T_{k,nu} is nonempty."""
        if k in self._reach:
            return self._reach[k]
        if k == 1:
            out = frozenset(self.support)
        else:
            acc: set[Mode] = set()
            for p in self.branchings:
                if p > k - 1:
                    break
                for comp in _compositions(k - 1, p):
                    sets = [self.reachable(ki) for ki in comp]
                    if any(not s for s in sets):
                        continue
                    sums = {tuple([0] * self.d)}
                    for s in sets:
                        sums = {_add(a, b) for a in sums for b in s}
                    acc |= sums
            out = frozenset(acc)
        self._reach[k] = out
        return out

    def _splits(self, comp: tuple[int, ...], nu: Mode) -> Iterator[tuple[Mode, ...]]:
        """Ordered momentum splits nu = nu_1 + ... + nu_p with nu_i reachable at order k_i."""
        if len(comp) == 1:
            if nu in self.reachable(comp[0]):
                yield (nu,)
            return
        for first in sorted(self.reachable(comp[0])):
            for rest in self._splits(comp[1:], _sub(nu, first)):
                yield (first,) + rest

    def count(self, k: int, nu: Sequence[int]) -> int:
        """|T_{k,nu}| without building the trees."""
        nu = tuple(nu)
        key = (k, nu)
        if key in self._counts:
            return self._counts[key]
        if k < 1:
            raise ValueError("order must be >= 1")
        if k == 1:
            n = 1 if nu in self.support else 0
        else:
            n = 0
            for p in self.branchings:
                if p > k - 1:
                    break
                for comp in _compositions(k - 1, p):
                    for split in self._splits(comp, nu):
                        n += math.prod(self.count(ki, ni) for ki, ni in zip(comp, split))
        self._counts[key] = n
        return n

    def _nested(self, k: int, nu: Mode) -> tuple[Nested, ...]:
        key = (k, nu)
        if key in self._trees:
            return self._trees[key]
        if k == 1:
            out: tuple[Nested, ...] = (("e", nu),) if nu in self.support else ()
        else:
            acc = []
            for p in self.branchings:
                if p > k - 1:
                    break
                for comp in _compositions(k - 1, p):
                    for split in self._splits(comp, nu):
                        families = [self._nested(ki, ni) for ki, ni in zip(comp, split)]
                        acc.extend(("v", kids) for kids in product(*families))
            out = tuple(acc)
        self._trees[key] = out
        return out

    def trees(self, k: int, nu: Sequence[int]) -> list[LabelledTree]:
        """All trees of order k and root momentum nu, in canonical (encoding) order."""
        nu = tuple(nu)
        if k < 1:
            raise ValueError("order must be >= 1")
        if len(nu) != self.d:
            raise ValueError(f"momentum {nu} has wrong dimension, expected {self.d}")
        n = self.count(k, nu)
        if n > self.budget:
            raise BudgetExceeded(f"|T_{{{k},{nu}}}| = {n} exceeds tree budget {self.budget}")
        out = [LabelledTree(t) for t in self._nested(k, nu)]
        out.sort(key=lambda t: t.encoding)
        return out


def enumerate_trees(
    k: int, nu: Sequence[int], support: Sequence[Mode], P: int, budget: int = DEFAULT_TREE_BUDGET
) -> list[LabelledTree]:
    """Trees of order k with root momentum nu, end modes in ``support``, p_v <= P."""
    if P < 2:
        return [] if k > 1 else TreeEnumerator(support, [], budget).trees(k, nu)
    return TreeEnumerator(support, range(2, P + 1), budget).trees(k, nu)


def validate_tree(tree: LabelledTree, support: Sequence[Mode] | None = None, P: int | None = None) -> list[str]:
    """Re-check the label constraints from scratch; returns violations."""
    problems = []
    nodes = tree.nodes
    roots = [n for n in nodes if n.parent is None]
    if len(roots) != 1:
        problems.append("tree must have exactly one root line")
    for n in nodes:
        for c in n.children:
            if nodes[c].parent != n.id:
                problems.append(f"node {c} does not point back to parent {n.id}")

    def ends_below(i: int) -> list[int]:
        if nodes[i].is_end:
            return [i]
        return [e for c in nodes[i].children for e in ends_below(c)]

    for n in nodes:
        below = ends_below(n.id)
        total = tuple(sum(nodes[e].mode[j] for e in below) for j in range(len(n.momentum)))
        if total != n.momentum:
            problems.append(f"line {n.id}: momentum {n.momentum} != sum of modes {total}")
        if n.is_end:
            if not any(n.mode):
                problems.append(f"end node {n.id} has zero mode")
            if support is not None and n.mode not in set(support):
                problems.append(f"end node {n.id} mode {n.mode} outside support")
        else:
            if n.p < 2:
                problems.append(f"internal node {n.id} has p_v = {n.p} < 2")
            if P is not None and n.p > P:
                problems.append(f"internal node {n.id} has p_v = {n.p} > P = {P}")
            if (n.degree == 0) != (not any(n.momentum)):
                problems.append(f"internal node {n.id}: degree {n.degree} inconsistent with momentum {n.momentum}")
    return problems


# --- value ------------------------------------------------------------------


def value(tree: LabelledTree, eps: complex, spec: ProblemSpec) -> complex:
    """Product of node factors and propagators, accumulated in post-order."""
    eps = complex(eps)
    a = spec.a
    nl = spec.nonlinearity
    val = 1 + 0j
    for n in tree.postorder():
        if n.is_end:
            val *= eps * spec.f(n.mode)
        else:
            val *= -(eps if n.degree == 1 else 1) * nl.a_p(n.p)
        if any(n.momentum):
            den = D(eps, dot(spec.omega, n.momentum), a)
            if den == 0:
                raise SingularPropagator(f"D(eps, omega.nu) = 0 on line {n.id} with nu = {n.momentum}")
            val /= den
        else:
            val /= a
    return val


# --- classification ---------------------------------------------------------


@dataclass
class TreeClassification:
    """Node and line sets of the multiscale-free bookkeeping; lines are exit-node ids."""

    E: frozenset[int]
    V: frozenset[int]
    V0: frozenset[int]
    V1: frozenset[int]
    V2: frozenset[int]
    V3: frozenset[int]
    V2bar: frozenset[int]
    V3bar: frozenset[int]
    V1bar: frozenset[int]
    r: dict[int, int]
    s: dict[int, int]
    m: dict[int, Mode]
    mu: dict[int, int]
    inner_line: dict[int, int]  # v in V3 -> the line entering v from an internal node
    L_int: frozenset[int]
    L1_of: dict[int, frozenset[int]] = field(default_factory=dict)
    L1: frozenset[int] = frozenset()
    L0: frozenset[int] = frozenset()


def classify(tree: LabelledTree, omega: Sequence[float], xi: float, C0: float) -> TreeClassification:
    nodes = tree.nodes
    E = frozenset(n.id for n in nodes if n.is_end)
    V = frozenset(n.id for n in nodes if not n.is_end)
    V0 = frozenset(v for v in V if nodes[v].degree == 0)
    V1 = V - V0
    r, s, m, mu, inner = {}, {}, {}, {}, {}
    d = len(tree.momentum)
    for v in sorted(V):
        kids = nodes[v].children
        end_kids = [c for c in kids if nodes[c].is_end]
        r[v] = len(end_kids)
        s[v] = len(kids) - r[v]
        mv = tuple([0] * d)
        for c in end_kids:
            mv = _add(mv, nodes[c].mode)
        m[v] = mv
        mu[v] = l1(mv)
    V2 = frozenset(v for v in V if s[v] == 0)
    V3 = frozenset(v for v in V if r[v] == 1 and s[v] == 1)
    for v in V3:
        inner[v] = next(c for c in nodes[v].children if not nodes[c].is_end)
    V2bar = frozenset(v for v in V2 if any(nodes[v].momentum))
    V3bar = frozenset(v for v in V3 if any(nodes[v].momentum) and any(nodes[inner[v]].momentum))
    V1bar = V2bar | V3bar
    L_int = frozenset(V1)  # lines exiting V1 nodes

    L1_of: dict[int, frozenset[int]] = {}
    for v in sorted(V2bar):
        L1_of[v] = frozenset({v})
    for v in sorted(V3bar):
        thr = math.exp(-xi * mu[v] / 16)
        chosen = frozenset(
            line for line in (v, inner[v]) if 2 * C0 * abs(dot(omega, nodes[line].momentum)) >= thr * (1 - CHECK_RTOL)
        )
        if not chosen:
            raise ClassificationContradiction(
                f"node {v} in tree {tree.encoding} has no line with 2 C0 |omega.nu| >= exp(-xi mu/16); "
                f"C0 = {C0} was probably estimated on too small a ball"
            )
        L1_of[v] = chosen
    L1 = frozenset().union(*L1_of.values()) if L1_of else frozenset()
    return TreeClassification(
        E=E, V=V, V0=V0, V1=V1, V2=V2, V3=V3, V2bar=V2bar, V3bar=V3bar, V1bar=V1bar,
        r=r, s=s, m=m, mu=mu, inner_line=inner, L_int=L_int,
        L1_of=L1_of, L1=L1, L0=L_int - L1,
    )


def check_lemma32(tree: LabelledTree) -> bool:
    """|E| >= |V| + 1 and 2|E| >= k + 1."""
    e = sum(1 for n in tree.nodes if n.is_end)
    v = len(tree.nodes) - e
    return e >= v + 1 and 2 * e >= order(tree) + 1


def check_lemma35(tree: LabelledTree, cls: TreeClassification) -> bool:
    """4|L_0| <= 3|E| - 4 for trees with at least one internal node.

    The single end-node tree (|E| = 1, no lines in L_0) cannot satisfy the
    inequality and is accepted as a vacuous case.
    """
    if len(cls.V) == 0:
        return True
    return 4 * len(cls.L0) <= 3 * len(cls.E) - 4


def divisor_violations(
    tree: LabelledTree, cls: TreeClassification, omega: Sequence[float], xi: float, C0: float
) -> list[int]:
    """Nodes in V2bar/V3bar whose divisor inequality fails (expected: none)."""
    bad = []
    nodes = tree.nodes
    for v in sorted(cls.V2bar):
        thr = math.exp(-xi * cls.mu[v] / 16)
        if C0 * abs(dot(omega, nodes[v].momentum)) < thr * (1 - CHECK_RTOL):
            bad.append(v)
    for v in sorted(cls.V3bar):
        thr = math.exp(-xi * cls.mu[v] / 16)
        big = max(abs(dot(omega, nodes[v].momentum)), abs(dot(omega, nodes[cls.inner_line[v]].momentum)))
        if 2 * C0 * big < thr * (1 - CHECK_RTOL):
            bad.append(v)
    return bad
