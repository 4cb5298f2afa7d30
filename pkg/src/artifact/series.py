"""Truncated bivariate power series in (x, y) and their order.

The order of a series f is the pair (s, s') with s the least x-exponent in
the support and s + s' the least total degree.  Two orders compare by
(s1, s1') >= (s0, s0') iff s1 >= s0 and s1 + s1' >= s0 + s0'; this is only a
partial order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .combinatorics import _UnionFind, components, enumerate_set_partitions, mobius_weight, partitions_of
from .cumulants import MomentSpec
from .errors import DomainError, SizeLimitError

DEFAULT_CAP = 12
MAX_SERIES_CAP = 16
EXHAUSTIVE_TREE_LIMIT = 8


# --- orders --------------------------------------------------------------

@dataclass(frozen=True)
class Order:
    """(s, s') in N^2, or infinite when both are ``math.inf``."""

    s: float
    sp: float

    @property
    def total(self) -> float:
        return self.s + self.sp

    @property
    def is_infinite(self) -> bool:
        return self.s == math.inf

    def geq(self, other: "Order") -> bool:
        other = as_order(other)
        return self.s >= other.s and self.total >= other.total

    def __add__(self, other: "Order") -> "Order":
        other = as_order(other)
        if self.is_infinite or other.is_infinite:
            return INFINITE
        return Order(self.s + other.s, self.sp + other.sp)

    def __iter__(self):
        return iter((self.s, self.sp))


INFINITE = Order(math.inf, math.inf)


def as_order(v) -> Order:
    if isinstance(v, Order):
        return v
    if v is None:
        return INFINITE
    s, sp = v
    if s < 0 or sp < 0:
        raise DomainError("order components must be nonnegative")
    return Order(s, sp)


def order_cmp(a, b) -> str:
    """One of 'equal', 'geq', 'leq', 'incomparable'."""
    a, b = as_order(a), as_order(b)
    ge, le = a.geq(b), b.geq(a)
    if ge and le:
        return "equal"
    if ge:
        return "geq"
    if le:
        return "leq"
    return "incomparable"


def order_inf(orders: Iterable) -> Order:
    """Greatest lower bound of a finite set: (min s, min total - min s)."""
    orders = [as_order(o) for o in orders]
    finite = [o for o in orders if not o.is_infinite]
    if not finite:
        return INFINITE
    s = min(o.s for o in finite)
    return Order(s, min(o.total for o in finite) - s)


# --- truncated series ----------------------------------------------------

@dataclass(frozen=True)
class TruncatedBivariateSeries:
    """Coefficients c[(s, s')] for s + s' <= cap; missing keys are zero."""

    cap: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (s, sp), c in self.coeffs.items():
            if s < 0 or sp < 0:
                raise DomainError("negative exponent")
            if s + sp <= self.cap and c != 0:
                clean[(s, sp)] = c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def constant(cls, c, cap: int) -> "TruncatedBivariateSeries":
        return cls(cap, {(0, 0): Fraction(c)})

    @classmethod
    def monomial(cls, s: int, sp: int, cap: int, c=1) -> "TruncatedBivariateSeries":
        return cls(cap, {(s, sp): Fraction(c)})

    def const_term(self):
        return self.coeffs.get((0, 0), 0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def _check(self, other: "TruncatedBivariateSeries"):
        if self.cap != other.cap:
            raise DomainError(f"cap mismatch: {self.cap} vs {other.cap}")

    def __add__(self, other):
        if not isinstance(other, TruncatedBivariateSeries):
            other = TruncatedBivariateSeries.constant(other, self.cap)
        self._check(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return TruncatedBivariateSeries(self.cap, out)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedBivariateSeries(self.cap, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, TruncatedBivariateSeries) else -Fraction(other))

    def scale(self, a) -> "TruncatedBivariateSeries":
        return TruncatedBivariateSeries(self.cap, {k: a * c for k, c in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, TruncatedBivariateSeries):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        cap = self.cap
        for (s1, t1), c1 in self.coeffs.items():
            d1 = s1 + t1
            for (s2, t2), c2 in other.coeffs.items():
                if d1 + s2 + t2 > cap:
                    continue
                key = (s1 + s2, t1 + t2)
                out[key] = out.get(key, 0) + c1 * c2
        return TruncatedBivariateSeries(cap, out)

    __rmul__ = __mul__

    def evaluate(self, x, y):
        return sum((c * x ** s * y ** sp for (s, sp), c in self.coeffs.items()), 0)


def series_order(f: TruncatedBivariateSeries) -> Order:
    if f.is_zero():
        return INFINITE
    s = min(k[0] for k in f.coeffs)
    return Order(s, min(a + b for a, b in f.coeffs) - s)


def reciprocal_one_plus(f: TruncatedBivariateSeries) -> TruncatedBivariateSeries:
    """1 / (1 + f) as sum_d (-f)^d; needs f(0, 0) = 0."""
    if f.const_term() != 0:
        raise DomainError("reciprocal_one_plus needs a zero constant term")
    one = TruncatedBivariateSeries.constant(1, f.cap)
    out, power = one, one
    minus_f = -f
    # (-f)^d has total degree >= d, so d <= cap suffices
    for _ in range(f.cap):
        power = power * minus_f
        if power.is_zero():
            break
        out = out + power
    return out


def reciprocal(g: TruncatedBivariateSeries) -> TruncatedBivariateSeries:
    """1 / g for g with a nonzero constant term."""
    c = g.const_term()
    if c == 0:
        raise DomainError("series with zero constant term has no reciprocal")
    c = Fraction(c)
    return reciprocal_one_plus(g.scale(1 / c) - 1).scale(1 / c)


def series_combine(kind: str, f: TruncatedBivariateSeries, g: TruncatedBivariateSeries | None = None):
    if kind == "product":
        return f * g
    if kind == "sum":
        return f + g
    if kind == "reciprocal_one_plus":
        return reciprocal_one_plus(f)
    raise DomainError(f"unknown combination {kind!r}")


def geometric(a, cap: int, var: str = "x") -> TruncatedBivariateSeries:
    """1 / (1 - a*var) truncated."""
    a = Fraction(a)
    if var == "x":
        return TruncatedBivariateSeries(cap, {(s, 0): a ** s for s in range(cap + 1)})
    return TruncatedBivariateSeries(cap, {(0, s): a ** s for s in range(cap + 1)})


def u_delta_series(spec: MomentSpec, delta: Iterable[int], cap: int = DEFAULT_CAP) -> TruncatedBivariateSeries:
    """The quasi-factorized moment of ``delta`` as a series in (x, y)."""
    if cap > MAX_SERIES_CAP:
        raise SizeLimitError(f"series cap limited to {MAX_SERIES_CAP}")
    I = spec.union(delta)
    out = TruncatedBivariateSeries.constant(Fraction(spec.eta) ** len(I), cap)
    for A in spec.A_sets:
        for a in range(1, len(I & A)):
            out = out * geometric(a, cap, "x")
    for B in spec.B_sets:
        for b in range(1, len(I & B)):
            out = out * TruncatedBivariateSeries(cap, {(0, 0): Fraction(1), (0, 1): Fraction(-b)})
    return out


def spec_family(spec: MomentSpec, cap: int = DEFAULT_CAP) -> Callable[[frozenset], TruncatedBivariateSeries]:
    cache: dict = {}

    def family(delta):
        delta = frozenset(delta)
        if delta not in cache:
            cache[delta] = u_delta_series(spec, delta, cap)
        return cache[delta]

    return family


def _subsets(delta: tuple):
    for k in range(len(delta) + 1):
        yield from itertools.combinations(delta, k)


def p_delta_minus_one(family, delta: Iterable[int], cap: int = DEFAULT_CAP) -> TruncatedBivariateSeries:
    """prod_{d subset delta} u_d ^ ((-1)^(|delta| - |d|)) minus 1.

    For a singleton the product is u_{i} / u_{} = u_{i}, so the result is
    u_{i} - 1.
    """
    delta = tuple(sorted(delta))
    num = TruncatedBivariateSeries.constant(1, cap)
    den = TruncatedBivariateSeries.constant(1, cap)
    for sub in _subsets(delta):
        u = family(frozenset(sub))
        if u.cap != cap:
            raise DomainError("family cap differs from the requested cap")
        if u.const_term() == 0:
            raise DomainError(f"u for {sub} has zero constant term")
        if (len(delta) - len(sub)) % 2 == 0:
            num = num * u
        else:
            den = den * u
    return num * reciprocal(den) - 1


def kappa_delta_series(family, delta: Iterable[int], cap: int = DEFAULT_CAP) -> TruncatedBivariateSeries:
    """Mobius-weighted sum over partitions of delta of block products."""
    delta = tuple(sorted(delta))
    if len(delta) > 6:
        raise SizeLimitError("kappa series limited to |delta| <= 6")
    out = TruncatedBivariateSeries(cap, {})
    for part in partitions_of(delta):
        term = TruncatedBivariateSeries.constant(mobius_weight(part), cap)
        for block in part:
            term = term * family(frozenset(block))
        out = out + term
    return out


def kappa_tail_bound(spec: MomentSpec, cap: int, x0, y0) -> float:
    """l^(2l) eta^L sum_{d+d' > cap} (L^2 x0)^d (L^2 y0)^d'; inf when divergent."""
    l, L = spec.l, spec.L
    a, b = L * L * float(x0), L * L * float(y0)
    if max(a, b) >= 1:
        return math.inf
    # sum over total degree t > cap of sum_{d=0}^{t} a^d b^(t-d)
    tail = 0.0
    t = cap + 1
    while True:
        term = sum(a ** d * b ** (t - d) for d in range(t + 1))
        tail += term
        if term < 1e-30 * max(tail, 1e-300) or t > cap + 2000:
            break
        t += 1
    return l ** (2 * l) * float(spec.eta) ** L * tail


# --- polynomial graphs ---------------------------------------------------

SYMBOLS = ("x", "y", "one")


@dataclass(frozen=True)
class PolyGraph:
    """Undirected graph whose edges carry one of the symbols x, y, one."""

    vertices: tuple
    edges: tuple  # (u, v, symbol)

    def __post_init__(self):
        vs = set(self.vertices)
        seen = set()
        for u, v, sym in self.edges:
            if sym not in SYMBOLS:
                raise DomainError(f"unknown edge symbol {sym!r}")
            if u == v:
                raise DomainError("self-loops are not allowed")
            if u not in vs or v not in vs:
                raise DomainError("edge endpoint outside the vertex set")
            key = frozenset((u, v))
            if key in seen:
                raise DomainError("parallel edges are not allowed")
            seen.add(key)

    def induced(self, subset: Iterable) -> "PolyGraph":
        sub = set(subset)
        return PolyGraph(tuple(v for v in self.vertices if v in sub),
                         tuple(e for e in self.edges if e[0] in sub and e[1] in sub))

    def one_components(self) -> list[tuple]:
        return components(self.vertices, ((u, v) for u, v, s in self.edges if s == "one"))


def build_lstar(spec: MomentSpec) -> PolyGraph:
    """y-edge when a B set meets both I sets, else x-edge when an A set does."""
    edges = []
    for t in range(spec.l):
        for u in range(t + 1, spec.l):
            It, Iu = spec.I_sets[t], spec.I_sets[u]
            if any(It & B and Iu & B for B in spec.B_sets):
                edges.append((t, u, "y"))
            elif any(It & A and Iu & A for A in spec.A_sets):
                edges.append((t, u, "x"))
    return PolyGraph(tuple(range(spec.l)), tuple(edges))


def _tree_degree(edges) -> Order:
    nx = sum(1 for e in edges if e[2] == "x")
    ny = sum(1 for e in edges if e[2] == "y")
    return Order(nx, ny)


def spanning_trees(g: PolyGraph):
    """Yield every spanning tree as a tuple of edges (exhaustive search)."""
    n = len(g.vertices)
    edges = list(g.edges)
    if n <= 1:
        yield ()
        return

    def rec(start: int, chosen: list, parent: dict):
        if len(chosen) == n - 1:
            yield tuple(chosen)
            return
        # not enough edges left to finish
        if len(edges) - start < n - 1 - len(chosen):
            return
        for idx in range(start, len(edges)):
            u, v, _ = edges[idx]
            ru, rv = _find(parent, u), _find(parent, v)
            if ru == rv:
                continue
            new_parent = dict(parent)
            new_parent[rv] = ru
            chosen.append(edges[idx])
            yield from rec(idx + 1, chosen, new_parent)
            chosen.pop()

    yield from rec(0, [], {v: v for v in g.vertices})


def _find(parent: dict, v):
    while parent[v] != v:
        v = parent[v]
    return v


def poly_graph_order_exhaustive(g: PolyGraph) -> Order:
    if len(components(g.vertices, ((u, v) for u, v, _ in g.edges))) > 1:
        return INFINITE
    return order_inf(_tree_degree(t) for t in spanning_trees(g))


def _min_cost_tree(g: PolyGraph, cost: dict) -> float:
    uf = _UnionFind(g.vertices)
    total, used = 0, 0
    for u, v, sym in sorted(g.edges, key=lambda e: cost[e[2]]):
        if uf.union(u, v):
            total += cost[sym]
            used += 1
    if used != len(g.vertices) - 1:
        return math.inf
    return total


def poly_graph_order_kruskal(g: PolyGraph) -> Order:
    """Two minimum spanning trees: one counting x-edges, one counting x and y."""
    if len(g.vertices) <= 1:
        return Order(0, 0)
    s = _min_cost_tree(g, {"x": 1, "y": 0, "one": 0})
    if s == math.inf:
        return INFINITE
    total = _min_cost_tree(g, {"x": 1, "y": 1, "one": 0})
    return Order(s, total - s)


def poly_graph_order(g: PolyGraph) -> Order:
    if len(g.vertices) <= EXHAUSTIVE_TREE_LIMIT:
        return poly_graph_order_exhaustive(g)
    return poly_graph_order_kruskal(g)
