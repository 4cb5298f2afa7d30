"""Counting injective placements under band constraints |pos(u) - pos(v)| <= rho.

The counting loop runs in a compiled extension when it is available and
falls back to ``kernels_py`` otherwise.  Set ARTIFACT_PURE_PYTHON=1 to force
the fallback.
"""

from __future__ import annotations

import os
from collections import deque

from . import kernels_py

try:
    if os.environ.get("ARTIFACT_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from ._bandcount import count_band_placements as _compiled
    BACKEND = "compiled"
except ImportError:
    _compiled = None
    BACKEND = "python"

# the compiled loop accumulates in a signed 64-bit integer
_INT64_SAFE = 2 ** 62


def prepare(n_items: int, edges, fixed: dict | None = None):
    """Visit order and parent/neighbour arrays for the counting kernel.

    Returns None when the pinned positions already clash.
    """
    fixed = dict(fixed or {})
    if len(set(fixed.values())) < len(fixed):
        return None
    adj = [set() for _ in range(n_items)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    order: list[int] = []
    seen = [False] * n_items
    # roots: pinned items first so their components are anchored
    roots = sorted(range(n_items), key=lambda i: (i not in fixed, i))
    for r in roots:
        if seen[r]:
            continue
        seen[r] = True
        queue = deque([r])
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in sorted(adj[u]):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    where = {item: i for i, item in enumerate(order)}
    parent, nb_start, nb_list, fixed_arr = [], [0], [], []
    for i, item in enumerate(order):
        earlier = sorted(where[v] for v in adj[item] if where[v] < i)
        parent.append(earlier[0] if earlier else -1)
        nb_list.extend(earlier)
        nb_start.append(len(nb_list))
        fixed_arr.append(fixed.get(item, -1))
    return parent, nb_start, nb_list, fixed_arr, sorted(fixed.values())


def count_placements(n: int, rho: int, n_items: int, edges, fixed: dict | None = None,
                     backend: str | None = None) -> int:
    """Number of injective maps items -> range(n) meeting every band edge
    and every pinned position."""
    if fixed and any(not 0 <= p < n for p in fixed.values()):
        return 0
    if n_items > n:
        return 0
    prep = prepare(n_items, edges, fixed)
    if prep is None:
        return 0
    use = backend or BACKEND
    if use == "compiled" and _compiled is not None and n ** max(n_items, 1) < _INT64_SAFE:
        return _compiled(n, rho, *prep)
    return kernels_py.count_band_placements(n, rho, *prep)
