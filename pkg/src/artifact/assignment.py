"""Exact linear assignment shared by the error metrics and the estimators.

Wraps ``scipy.optimize.linear_sum_assignment``, which is deterministic for a
given cost matrix; among optimal assignments it returns the one its
shortest-augmenting-path search reaches first when rows are scanned in index
order.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def min_cost_assignment(cost) -> np.ndarray:
    """col[i] for each row i of a square cost matrix, minimizing total cost."""
    cost = np.asarray(cost, dtype=float)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    return out


def max_agreement(counts) -> tuple[np.ndarray, int]:
    """Assignment maximizing the summed integer counts, and that maximum."""
    counts = np.asarray(counts)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    out = np.empty(counts.shape[0], dtype=np.int64)
    out[rows] = cols
    return out, int(counts[rows, cols].sum())
