"""Set partitions, pairings, multi-indices and small graph helpers.

Ground sets are 0-based: ``range(l)``.  A set partition is a tuple of
blocks, each block a sorted tuple, blocks ordered by their smallest element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Iterator, Sequence

from .errors import DomainError, SizeLimitError

MAX_PARTITION_GROUND = 12
MAX_PAIRING_SIZE = 12

SetPartition = tuple[tuple[int, ...], ...]


def enumerate_set_partitions(l: int) -> Iterator[SetPartition]:
    """Yield every partition of ``range(l)`` once.

    Uses restricted-growth strings a[0..l-1] with a[0] = 0 and
    a[i] <= 1 + max(a[:i]); the order is lexicographic in the string.
    """
    if not 1 <= l <= MAX_PARTITION_GROUND:
        raise SizeLimitError(f"set partitions need 1 <= l <= {MAX_PARTITION_GROUND}, got {l}")
    a = [0] * l
    # b[i] = max(a[:i]) + 1, the largest value allowed at position i
    b = [1] * l
    while True:
        yield _rgs_to_blocks(a)
        i = l - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, l):
            a[j] = 0
            b[j] = max(b[i], a[i] + 1)


def _rgs_to_blocks(a: Sequence[int]) -> SetPartition:
    blocks: list[list[int]] = []
    for i, v in enumerate(a):
        if v == len(blocks):
            blocks.append([i])
        else:
            blocks[v].append(i)
    return tuple(tuple(b) for b in blocks)


def partitions_of(items: Sequence[Hashable]) -> Iterator[tuple[tuple, ...]]:
    """Set partitions of an arbitrary finite sequence of distinct items."""
    items = list(items)
    if not items:
        yield ()
        return
    for part in enumerate_set_partitions(len(items)):
        yield tuple(tuple(items[i] for i in block) for block in part)


def mobius_weight(blocks: Sequence) -> int:
    """(-1)^(|G|-1) (|G|-1)! for a partition with |G| blocks."""
    k = len(blocks)
    if k == 0:
        raise DomainError("empty partition has no Mobius weight")
    return (-1) ** (k - 1) * math.factorial(k - 1)


def enumerate_pairings(elements: Sequence, same_column_only: bool = False) -> Iterator[tuple[tuple, ...]]:
    """Yield all perfect matchings of a multiset given as a list.

    Repeated values are distinct elements (positions), so a list of size 2l
    has (2l-1)!! pairings.  With ``same_column_only`` every pair must share
    its last coordinate (cells are tuples whose last entry is the column).
    """
    elements = list(elements)
    if len(elements) % 2:
        raise DomainError("pairings need an even number of elements")
    if len(elements) > MAX_PAIRING_SIZE:
        raise SizeLimitError(f"pairings limited to {MAX_PAIRING_SIZE} elements")

    def rec(rest: list):
        if not rest:
            yield ()
            return
        first = rest[0]
        for idx in range(1, len(rest)):
            other = rest[idx]
            if same_column_only and first[-1] != other[-1]:
                continue
            remaining = rest[1:idx] + rest[idx + 1:]
            for tail in rec(remaining):
                yield ((first, other),) + tail

    yield from rec(elements)


class _UnionFind:
    def __init__(self, items: Iterable[Hashable]):
        self.parent = {v: v for v in items}

    def find(self, v):
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, u, v) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        self.parent[rv] = ru
        return True


def components(vertices: Iterable[Hashable], edges: Iterable[tuple]) -> list[tuple]:
    """Connected components as sorted tuples, ordered by first vertex."""
    vertices = list(vertices)
    uf = _UnionFind(vertices)
    for u, v in edges:
        uf.union(u, v)
    groups: dict = {}
    for v in vertices:
        groups.setdefault(uf.find(v), []).append(v)
    out = [tuple(sorted(g)) for g in groups.values()]
    out.sort()
    return out


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with edge weights in (0, 1]."""

    vertices: tuple
    edges: tuple  # (u, v, weight)

    def __post_init__(self):
        vs = set(self.vertices)
        for u, v, w in self.edges:
            if u == v:
                raise DomainError("self-loops are not allowed")
            if u not in vs or v not in vs:
                raise DomainError(f"edge ({u}, {v}) has an unknown endpoint")
            if not 0 < w <= 1:
                raise DomainError(f"edge weight {w} outside (0, 1]")


def connected_components(g: WeightedGraph, min_weight=1) -> list[tuple]:
    """Components of the subgraph keeping edges with weight >= min_weight."""
    return components(g.vertices, ((u, v) for u, v, w in g.edges if w >= min_weight))


def max_weight_spanning_tree_weight(g: WeightedGraph):
    """Largest product of edge weights over spanning trees; 0 if disconnected.

    Kruskal on decreasing weights.  Exact when all weights are rationals,
    otherwise the product is accumulated as a sum of logs.
    """
    if len(g.vertices) <= 1:
        return 1
    uf = _UnionFind(g.vertices)
    chosen = []
    for u, v, w in sorted(g.edges, key=lambda e: e[2], reverse=True):
        if uf.union(u, v):
            chosen.append(w)
    if len(chosen) != len(g.vertices) - 1:
        return 0
    if all(isinstance(w, (int, Fraction)) for w in chosen):
        return math.prod(chosen, start=Fraction(1))
    return math.exp(math.fsum(math.log(w) for w in chosen))


# --- multi-indices -------------------------------------------------------

GRID_KINDS = ("matrix", "tensor", "square")


@dataclass(frozen=True)
class MultiIndex:
    """A multiset of grid cells stored sparsely as sorted (cell, multiplicity).

    Cell shapes: matrix (i, j), tensor (k, m, j), square (i, j).
    """

    entries: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise DomainError(f"unknown grid kind {self.kind!r}")
        for cell, mult in self.entries:
            if mult < 1:
                raise DomainError("multiplicities must be positive")

    @classmethod
    def from_cells(cls, cells: Iterable[tuple], kind: str) -> "MultiIndex":
        counts: dict = {}
        for c in cells:
            c = tuple(c)
            counts[c] = counts.get(c, 0) + 1
        return cls(tuple(sorted(counts.items())), kind)

    @classmethod
    def from_dict(cls, d: dict, kind: str) -> "MultiIndex":
        return cls(tuple(sorted((tuple(c), m) for c, m in d.items() if m)), kind)

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.entries)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(m) for _, m in self.entries)

    def cells(self) -> list[tuple]:
        """Cells with repetition, in sorted order."""
        return [c for c, m in self.entries for _ in range(m)]

    def support(self) -> set:
        if self.kind == "matrix":
            return {c[0] for c, _ in self.entries}
        if self.kind == "square":
            return {i for c, _ in self.entries for i in c}
        return {(c[0], c[1]) for c, _ in self.entries}

    def columns(self) -> set:
        if self.kind == "square":
            raise DomainError("square grids have no separate column set")
        return {c[-1] for c, _ in self.entries}

    def samples(self) -> set:
        if self.kind != "tensor":
            raise DomainError("sample sets exist only for tensor grids")
        return {c[1] for c, _ in self.entries}


@dataclass(frozen=True)
class AlphaSummary:
    degree: int
    factorial: int
    support: frozenset
    columns: frozenset | None
    samples: frozenset | None
    cc: int
    n_nodes: int
    n_edges: int


def anchors_for(kind: str) -> tuple:
    """The two anchor items tied to the estimated entry x."""
    return ((0, 0), (0, 1)) if kind == "tensor" else (0, 1)


def alpha_summary(alpha: MultiIndex) -> AlphaSummary:
    """Degree, factorial, support sets and the anchored component count.

    The graph has the anchors plus the support as item nodes, plus column
    nodes for matrix/tensor grids; each unit of multiplicity is an edge and
    one extra edge joins the two anchors.
    """
    if not alpha.entries:
        raise DomainError("alpha must be nonzero")
    a, b = anchors_for(alpha.kind)
    supp = alpha.support()
    edges: list[tuple] = [(("u", a), ("u", b))]
    if alpha.kind == "square":
        nodes = {("u", i) for i in supp | {a, b}}
        for (i, j), m in alpha.entries:
            edges += [(("u", i), ("u", j))] * m
        cols = None
    else:
        cols = alpha.columns()
        nodes = {("u", i) for i in supp | {a, b}} | {("v", j) for j in cols}
        for cell, m in alpha.entries:
            item = cell[0] if alpha.kind == "matrix" else (cell[0], cell[1])
            edges += [(("u", item), ("v", cell[-1]))] * m
    cc = len(components(nodes, edges))
    return AlphaSummary(
        degree=alpha.degree,
        factorial=alpha.factorial,
        support=frozenset(supp),
        columns=frozenset(cols) if cols is not None else None,
        samples=frozenset(alpha.samples()) if alpha.kind == "tensor" else None,
        cc=cc,
        n_nodes=len(nodes),
        n_edges=len(edges),
    )


def falling_factorial(x, k: int):
    """x (x-1) ... (x-k+1); the empty product is 1."""
    out = 1
    for i in range(k):
        out *= x - i
    return out
