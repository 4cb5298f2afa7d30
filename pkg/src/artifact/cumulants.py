"""Joint cumulants from moment oracles, quasi-factorized moments and their bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping

from .combinatorics import components, enumerate_set_partitions, mobius_weight
from .errors import DomainError, PreconditionError, SingularityError, SizeLimitError

MAX_CUMULANT_ORDER = 12
MAX_FERAY_ORDER = 8


def moment_table(oracle: Callable[[frozenset], object], l: int) -> list:
    """Dense table over bitmasks: table[mask] = oracle(set bits of mask)."""
    table = [None] * (1 << l)
    for mask in range(1 << l):
        table[mask] = 1 if mask == 0 else oracle(frozenset(i for i in range(l) if mask >> i & 1))
    return table


def joint_cumulant(oracle, l: int):
    """Sum over set partitions G of [l] of m(G) prod_{R in G} E[prod_{i in R} Z_i].

    ``oracle`` is either a callable on frozensets of ``range(l)`` or a dense
    bitmask table as produced by :func:`moment_table`.  The result is exact
    when the oracle returns rationals.
    """
    if not 1 <= l <= MAX_CUMULANT_ORDER:
        raise SizeLimitError(f"cumulant order must be in [1, {MAX_CUMULANT_ORDER}], got {l}")
    table = oracle if isinstance(oracle, (list, tuple)) else moment_table(oracle, l)
    if len(table) != 1 << l:
        raise DomainError("moment table has the wrong length")
    total = 0
    for part in enumerate_set_partitions(l):
        term = mobius_weight(part)
        for block in part:
            mask = 0
            for i in block:
                mask |= 1 << i
            term *= table[mask]
            if term == 0:
                break
        total += term
    return total


def _as_exact(v):
    if isinstance(v, (Rational, Fraction)):
        return Fraction(v)
    return v


@dataclass(frozen=True)
class MomentSpec:
    """Parameters of a quasi-factorized family of mixed moments.

    E[prod_{t in D} Z_t] = eta^|I_D| prod_j prod_{a<|I_D & A_j|} 1/(1 - a x0)
                            prod_i prod_{b<|I_D & B_i|} (1 - b y0)
    """

    eta: object
    x0: object
    y0: object
    I_sets: tuple
    A_sets: tuple = ()
    B_sets: tuple = ()

    def __post_init__(self):
        for name in ("I_sets", "A_sets", "B_sets"):
            fam = tuple(frozenset(s) for s in getattr(self, name))
            object.__setattr__(self, name, fam)
            seen: set = set()
            for s in fam:
                if seen & s:
                    raise DomainError(f"{name} must be pairwise disjoint")
                seen |= s
        for name in ("eta", "x0", "y0"):
            object.__setattr__(self, name, _as_exact(getattr(self, name)))
        if not 0 < self.eta <= 1:
            raise DomainError("eta must lie in (0, 1]")
        if self.x0 < 0 or self.y0 < 0:
            raise DomainError("x0 and y0 must be nonnegative")
        if self.L > 64:
            raise SizeLimitError("at most 64 items in the union of the I sets")

    @property
    def l(self) -> int:
        return len(self.I_sets)

    @property
    def L(self) -> int:
        return len(frozenset().union(*self.I_sets)) if self.I_sets else 0

    @property
    def q(self) -> int:
        return len(self.A_sets)

    @property
    def r(self) -> int:
        return len(self.B_sets)

    def union(self, delta: Iterable[int]) -> frozenset:
        return frozenset().union(*(self.I_sets[t] for t in delta))

    def b_graph_components(self) -> int:
        """Components (isolated vertices included) of the graph on [l] linking
        t, t' whenever one B set meets both I_t and I_t'."""
        edges = []
        for B in self.B_sets:
            hit = [t for t, I in enumerate(self.I_sets) if I & B]
            edges += [(hit[0], t) for t in hit[1:]]
        return len(components(range(self.l), edges))


def mixed_moment_closed_form(spec: MomentSpec, delta: Iterable[int]):
    """Closed-form E[prod_{t in delta} Z_t]; exact for rational parameters."""
    I = spec.union(delta)
    value = spec.eta ** len(I)
    for A in spec.A_sets:
        for a in range(1, len(I & A)):
            den = 1 - a * spec.x0
            if den == 0:
                raise SingularityError(f"factor 1 - {a} x0 vanishes")
            if den < 0:
                raise DomainError(f"factor 1 - {a} x0 is negative")
            value /= den
    for B in spec.B_sets:
        for b in range(1, len(I & B)):
            value *= 1 - b * spec.y0
    return value


def closed_form_oracle(spec: MomentSpec) -> list:
    return moment_table(lambda d: mixed_moment_closed_form(spec, d), spec.l)


def core_bound(spec: MomentSpec):
    """Upper bound on |cumul(Z_1, ..., Z_l)| for quasi-factorized moments.

    With B sets (r >= 1) it needs 2 L^2 y0 <= 1 and 2 x0 <= y0; without them
    it needs 2 L^2 x0 <= 1.  Exact for rational parameters.
    """
    l, L = spec.l, spec.L
    eta, x0, y0 = spec.eta, spec.x0, spec.y0
    if l < 1:
        raise DomainError("need at least one variable")
    if spec.r >= 1:
        if 2 * L * L * y0 > 1:
            raise PreconditionError(f"2 L^2 y0 <= 1 fails (L={L}, y0={y0})")
        if 2 * x0 > y0:
            raise PreconditionError(f"2 x0 <= y0 fails (x0={x0}, y0={y0})")
        cc = spec.b_graph_components()
        base = 4 * l ** (2 * l) * eta ** L * (L * L * y0) ** (l - 1)
        if cc == 1:
            return base
        if y0 == 0:
            # then x0 = 0 as well and base already vanishes for l >= 2
            return base * 0
        return base * (x0 / y0) ** (cc - 1)
    if 2 * L * L * x0 > 1:
        raise PreconditionError(f"2 L^2 x0 <= 1 fails (L={L}, x0={x0})")
    return 2 * l ** (2 * l) * eta ** L * (L * L * x0) ** (l - 1)


def feray_recursion(r: int, d_inf=1):
    """C_r = D + sum over partitions G != {[r]} of prod_{R in G} C_|R|, C_1 = D."""
    if not 1 <= r <= MAX_FERAY_ORDER:
        raise SizeLimitError(f"recursion order must be in [1, {MAX_FERAY_ORDER}]")
    C = {1: d_inf}
    for k in range(2, r + 1):
        total = d_inf
        for part in enumerate_set_partitions(k):
            if len(part) == 1:
                continue
            total += math.prod(C[len(b)] for b in part)
        C[k] = total
    return C[r]
