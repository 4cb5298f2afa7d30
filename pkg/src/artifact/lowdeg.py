"""Cumulants of the target with the signal, their bounds and low-degree MMSE bounds.

Noise variance is normalized to 1.  Each model has a parameter object with
the signal scale ``lam`` (per-entry standard deviation of the means for the
Gaussian-mixture models, band height for seriation):

* ClusteringParams(n, K, p, lam): cells (i, j) of the n x p observation.
* MFMParams(K, M, p, lam): cells (k, m, j) of the K x M x p observation.
* SeriationParams(n, rho, lam): cells (i, j) of the n x n observation.

The target x is the label agreement (or band indicator) of the two anchor
items.  Multi-indices are :class:`MultiIndex` objects or dicts cell -> mult.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np
import scipy.linalg

from .combinatorics import MultiIndex, alpha_summary, anchors_for, enumerate_pairings, falling_factorial
from .cumulants import joint_cumulant
from .errors import DomainError, PreconditionError, SizeLimitError
from .models import (
    BalancedPrior,
    ClusteringConfig,
    MFMConfig,
    MFMPrior,
    SeriationConfig,
    SeriationPrior,
    latent_moment,
    make_rng,
    standard_normal,
)

MAX_KAPPA_DEGREE = 8
MAX_SW_DEGREE = 4
MAX_SW_TERMS = 10 ** 7
MAX_FEATURES = 5000


def _exact(v):
    return v if isinstance(v, (int, Fraction)) else Fraction(v)


@dataclass(frozen=True)
class ClusteringParams:
    n: int
    K: int
    p: int
    lam: object

    model = "clustering"
    kind = "matrix"

    def __post_init__(self):
        if self.K < 2 or self.n % self.K or self.p < 1:
            raise DomainError("clustering needs K >= 2 dividing n and p >= 1")
        object.__setattr__(self, "lam", _exact(self.lam))

    @property
    def prior(self):
        return BalancedPrior(self.n, self.K)


@dataclass(frozen=True)
class MFMParams:
    K: int
    M: int
    p: int
    lam: object

    model = "mfm"
    kind = "tensor"

    def __post_init__(self):
        if self.K < 2 or self.M < 2 or self.p < 1:
            raise DomainError("feature matching needs K >= 2, M >= 2, p >= 1")
        object.__setattr__(self, "lam", _exact(self.lam))

    @property
    def prior(self):
        return MFMPrior(self.K, self.M)


@dataclass(frozen=True)
class SeriationParams:
    n: int
    rho: int
    lam: object

    model = "seriation"
    kind = "square"

    def __post_init__(self):
        if self.n < 2 or not 1 <= self.rho <= self.n - 1:
            raise DomainError("seriation needs n >= 2 and 1 <= rho <= n - 1")
        object.__setattr__(self, "lam", _exact(self.lam))

    @property
    def prior(self):
        return SeriationPrior(self.n, self.rho)


def params_from_config(cfg):
    """Rescale a sampler config to unit noise."""
    if isinstance(cfg, MFMConfig):
        return MFMParams(cfg.K, cfg.M, cfg.p, cfg.lam / cfg.sigma)
    if isinstance(cfg, ClusteringConfig):
        return ClusteringParams(cfg.n, cfg.K, cfg.p, cfg.lam / cfg.sigma)
    if isinstance(cfg, SeriationConfig):
        return SeriationParams(cfg.n, cfg.rho, cfg.lam)
    raise DomainError(f"not a model config: {cfg!r}")


def params_to_dict(params) -> dict:
    d = asdict(params)
    d["lam"] = float(d["lam"])
    return d


@dataclass(frozen=True)
class TargetSpec:
    """The 0/1 latent quantity being estimated, as a latent constraint."""

    model: str
    constraint: tuple


def target_for(params) -> TargetSpec:
    a, b = anchors_for(params.kind)
    kind = "band" if params.model == "seriation" else "eq"
    return TargetSpec(params.model, (kind, a, b))


# --- moments -------------------------------------------------------------

def _norm(c: tuple) -> tuple:
    kind, u, v = c
    return (kind, u, v) if u <= v else (kind, v, u)


@lru_cache(maxsize=1 << 18)
def _cached_moment(prior, constraints: frozenset) -> Fraction:
    return latent_moment(prior, sorted(constraints))


def indicator_moment(prior, constraints) -> Fraction:
    """E[prod of 0/1 indicators]; indicators are idempotent so only the set matters."""
    keep = frozenset(_norm(c) for c in constraints if not (c[0] in ("eq", "band") and c[1] == c[2]))
    if not keep:
        return Fraction(1)
    return _cached_moment(prior, keep)


def indicator_cumulant(prior, constraints: list) -> Fraction:
    """Joint cumulant of the listed indicators (repetitions are separate variables)."""
    l = len(constraints)

    def oracle(subset):
        return indicator_moment(prior, [constraints[t] for t in subset])

    return joint_cumulant(oracle, l)


# --- multi-index helpers -------------------------------------------------

def as_alpha(alpha, params) -> MultiIndex:
    if isinstance(alpha, MultiIndex):
        if alpha.kind != params.kind:
            raise DomainError(f"alpha has kind {alpha.kind}, expected {params.kind}")
        return alpha
    if isinstance(alpha, dict):
        return MultiIndex.from_dict(alpha, params.kind)
    return MultiIndex.from_cells(alpha, params.kind)


def _check_cells(alpha: MultiIndex, params) -> None:
    for cell, _ in alpha.entries:
        if params.kind == "matrix":
            ok = len(cell) == 2 and 0 <= cell[0] < params.n and 0 <= cell[1] < params.p
        elif params.kind == "tensor":
            ok = (len(cell) == 3 and 0 <= cell[0] < params.K and 0 <= cell[1] < params.M
                  and 0 <= cell[2] < params.p)
        else:
            ok = len(cell) == 2 and all(0 <= c < params.n for c in cell)
        if not ok:
            raise DomainError(f"cell {cell} outside the grid")


def _item(cell: tuple, kind: str):
    return cell[0] if kind == "matrix" else (cell[0], cell[1])


def support_size(alpha: MultiIndex) -> int:
    """|supp(alpha) together with the two anchors|."""
    return len(alpha.support() | set(anchors_for(alpha.kind)))


# --- nullity and exact cumulants ----------------------------------------

def nullity_filter(params, alpha) -> bool:
    """True when kappa_{x, alpha} is known to vanish without computing it."""
    alpha = as_alpha(alpha, params)
    if not alpha.entries:
        raise DomainError("alpha must be nonzero")
    if params.model == "seriation":
        # a diagonal entry of the signal is the constant lam
        return any(i == j for (i, j), _ in alpha.entries)
    if alpha.degree % 2:
        return True
    per_column: dict = {}
    for cell, m in alpha.entries:
        per_column[cell[-1]] = per_column.get(cell[-1], 0) + m
    # Gaussian means: a column with odd total admits no pairing
    if any(c % 2 for c in per_column.values()):
        return True
    if params.model == "mfm":
        touches = {0: 1, 1: 1}
        for (k, m, j), mult in alpha.entries:
            touches[m] = touches.get(m, 0) + mult
        if any(t == 1 for t in touches.values()):
            return True
    return False


def _pairing_constraints(params, alpha: MultiIndex) -> Iterator[list]:
    for pairing in enumerate_pairings(alpha.cells(), same_column_only=True):
        yield [("eq", _item(c1, params.kind), _item(c2, params.kind)) for c1, c2 in pairing]


def kappa_exact(params, alpha, target: TargetSpec | None = None) -> Fraction:
    """Exact cumul(x, X_alpha) with x the target indicator.

    Gaussian-mixture models: lam^|alpha| times the sum, over pairings of the
    cells of alpha within columns, of the joint cumulant of x with the
    label-agreement indicators of the paired items.  Seriation: lam^|alpha|
    times the joint cumulant of x with the band indicators of the cells.
    alpha = 0 gives E[x].
    """
    return _kappa_parts(params, alpha, target)[0]


def _kappa_parts(params, alpha, target):
    alpha = as_alpha(alpha, params)
    target = target or target_for(params)
    prior = params.prior
    if not alpha.entries:
        return indicator_moment(prior, [target.constraint]), Fraction(0)
    if alpha.degree > MAX_KAPPA_DEGREE:
        raise SizeLimitError(f"|alpha| = {alpha.degree} exceeds {MAX_KAPPA_DEGREE}")
    _check_cells(alpha, params)
    if support_size(alpha) > 12:
        raise SizeLimitError("more than 12 constrained items")
    scale = params.lam ** alpha.degree
    if params.model == "seriation":
        cons = [target.constraint] + [("band", i, j) for i, j in alpha.cells()]
        value = indicator_cumulant(prior, cons)
        return scale * value, abs(value)
    if alpha.degree % 2:
        return Fraction(0), Fraction(0)
    total = Fraction(0)
    largest = Fraction(0)
    seen: dict = {}
    for pair_cons in _pairing_constraints(params, alpha):
        key = tuple(sorted(_norm(c) for c in pair_cons))
        if key not in seen:
            seen[key] = indicator_cumulant(prior, [target.constraint] + pair_cons)
        value = seen[key]
        total += value
        largest = max(largest, abs(value))
    return scale * total, largest


@dataclass
class KappaReport:
    alpha: MultiIndex
    exact: Fraction
    bound: object
    null: bool
    preconditions_met: bool
    c_alpha: Fraction  # largest per-pairing cumulant magnitude, unscaled


def kappa_report(params, alpha) -> KappaReport:
    alpha = as_alpha(alpha, params)
    exact, largest = _kappa_parts(params, alpha, None)
    try:
        bound = kappa_bound(params, alpha)
        ok = True
    except PreconditionError:
        bound, ok = None, False
    return KappaReport(alpha, exact, bound, nullity_filter(params, alpha), ok, largest)


# --- closed-form cumulant bounds ----------------------------------------

def kappa_hypothesis(params, alpha) -> str | None:
    """None when the bound applies to alpha, otherwise the failed condition."""
    alpha = as_alpha(alpha, params)
    d, m = alpha.degree, support_size(alpha)
    if params.model == "clustering":
        if params.n < 2 * (d + 2) ** 2 * params.K:
            return f"n >= 2(|alpha|+2)^2 K fails (n={params.n}, |alpha|={d}, K={params.K})"
        if params.K < m:
            return f"K >= |supp| fails (K={params.K}, |supp|={m})"
    elif params.model == "mfm":
        if d < 2:
            return "|alpha| >= 2 fails"
        if params.K < 2 * m * m:
            return f"K >= 2|supp|^2 fails (K={params.K}, |supp|={m})"
    else:
        if params.n < 2 * m * m:
            return f"n >= 2|supp|^2 fails (n={params.n}, |supp|={m})"
    return None


def kappa_bound(params, alpha, scale=1):
    """Closed-form upper bound on |kappa_{x, alpha}|.

    Exact rational whenever the exponents are integers.  ``scale`` multiplies
    the leading constant; it exists only for negative-control runs.
    """
    alpha = as_alpha(alpha, params)
    if not alpha.entries:
        raise DomainError("alpha must be nonzero")
    failed = kappa_hypothesis(params, alpha)
    if failed:
        raise PreconditionError(failed)
    s = alpha_summary(alpha)
    d, m, cc = s.degree, support_size(alpha), s.cc
    lam = params.lam
    if params.model == "clustering":
        K, n = params.K, params.n
        value = 4 * lam ** d * d ** (5 * d + 9) * Fraction(1, K) ** (m - 1) * Fraction(K * m * m, n) ** (cc - 1)
    elif params.model == "mfm":
        if d % 2 == 0:
            lead = (8 * d ** 18) ** (d // 2 + 1)
        else:
            lead = (8.0 * d ** 18) ** (d / 2 + 1)
        value = lam ** d * lead * Fraction(1, params.K) ** (m - 1)
    else:
        n, rho = params.n, params.rho
        value = (lam ** d * 2 ** (5 * d + 7) * (d + 1) ** (20 * d + 21)
                 * Fraction(2 * rho, n) ** (m - 1) * Fraction(1, 2 * rho) ** (cc - 1))
    return scale * value


# --- enumeration of multi-indices up to symmetry ------------------------

def _relabel(seq, kind: str):
    """Rename non-anchor labels of an ordered cell sequence by first appearance.

    Returns (renamed sequence, renaming map).  Anchors keep their labels.
    """
    items = {0: 0, 1: 1}
    cols: dict = {}
    datasets = {0: 0, 1: 1}
    rows: dict = {}
    out = []

    def item(i):
        if i not in items:
            items[i] = len(items)
        return items[i]

    def col(j):
        if j not in cols:
            cols[j] = len(cols)
        return cols[j]

    for cell, mult in seq:
        if kind == "matrix":
            new = (item(cell[0]), col(cell[1]))
        elif kind == "square":
            new = (item(cell[0]), item(cell[1]))
        else:
            k, m, j = cell
            if m not in datasets:
                datasets[m] = len(datasets)
            local = rows.setdefault(m, {0: 0} if m in (0, 1) else {})
            if k not in local:
                local[k] = len(local)
            new = (local[k], datasets[m], col(j))
        out.append((new, mult))
    rename = (tuple(sorted(items.items())), tuple(sorted(cols.items())),
              tuple(sorted(datasets.items())),
              tuple(sorted((m, tuple(sorted(r.items()))) for m, r in rows.items())))
    return tuple(out), rename


def canonical_form(alpha: MultiIndex) -> tuple:
    """Smallest relabeled cell sequence over all orderings of the cells."""
    return min(_relabel(order, alpha.kind)[0] for order in itertools.permutations(alpha.entries))


def automorphism_count(alpha: MultiIndex) -> int:
    """Number of label renamings fixing alpha (alpha given in canonical form)."""
    form = canonical_form(alpha)
    maps = set()
    for order in itertools.permutations(alpha.entries):
        seq, rename = _relabel(order, alpha.kind)
        if seq == form:
            maps.add(rename)
    return len(maps)


def orbit_size(params, alpha: MultiIndex) -> int:
    """Number of multi-indices equivalent to alpha under the model symmetries."""
    kind = params.kind
    ways = 1
    if kind in ("matrix", "square"):
        n = params.n
        extra = len(alpha.support() - {0, 1})
        ways *= falling_factorial(n - 2, extra)
    if kind in ("matrix", "tensor"):
        ways *= falling_factorial(params.p, len(alpha.columns()))
    if kind == "tensor":
        ds = alpha.samples()
        ways *= falling_factorial(params.M - 2, len(ds - {0, 1}))
        for m in ds:
            rows = {k for (k, mm, _), _ in alpha.entries if mm == m}
            if m in (0, 1):
                ways *= falling_factorial(params.K - 1, len(rows - {0}))
            else:
                ways *= falling_factorial(params.K, len(rows))
    return ways // automorphism_count(alpha)


def _candidate_cells(params, alpha: MultiIndex | None) -> list:
    """Cells using existing labels of alpha, anchors, or one fresh label per type."""
    kind = params.kind
    entries = alpha.entries if alpha else ()
    if kind in ("matrix", "square"):
        used = {0, 1} | {i for cell, _ in entries for i in (cell if kind == "square" else cell[:1])}
        # a square cell may introduce two new items at once
        fresh = 2 if kind == "square" else 1
        items = sorted(used) + [i for i in range(max(used) + 1, max(used) + 1 + fresh) if i < params.n]
        if kind == "square":
            return [(i, j) for i in items for j in items]
        cols = sorted({cell[1] for cell, _ in entries})
        cols += [len(cols)] if len(cols) < params.p else []
        return [(i, j) for i in items for j in cols]
    cols = sorted({cell[2] for cell, _ in entries})
    cols += [len(cols)] if len(cols) < params.p else []
    ds = sorted({0, 1} | {cell[1] for cell, _ in entries})
    ds += [max(ds) + 1] if max(ds) + 1 < params.M else []
    out = []
    for m in ds:
        rows = sorted({cell[0] for cell, _ in entries if cell[1] == m} | ({0} if m in (0, 1) else set()))
        fresh = (max(rows) + 1) if rows else 0
        rows += [fresh] if fresh < params.K else []
        out += [(k, m, j) for k in rows for j in cols]
    return out


def _add_cell(alpha: MultiIndex | None, cell, kind: str) -> MultiIndex:
    d = dict(alpha.entries) if alpha else {}
    d[cell] = d.get(cell, 0) + 1
    return MultiIndex.from_dict(d, kind)


def _from_form(form: tuple, kind: str) -> MultiIndex:
    return MultiIndex.from_dict(dict(form), kind)


def enumerate_orbits(params, D: int) -> dict:
    """{degree: [(representative, orbit size)]} for 1 <= degree <= D."""
    if D > MAX_SW_DEGREE:
        raise SizeLimitError(f"degree {D} exceeds {MAX_SW_DEGREE}")
    out: dict = {}
    level = [None]
    for d in range(1, D + 1):
        forms: dict = {}
        for rep in level:
            for cell in _candidate_cells(params, rep):
                alpha = _add_cell(rep, cell, params.kind)
                form = canonical_form(alpha)
                if form not in forms:
                    forms[form] = _from_form(form, params.kind)
        level = [forms[f] for f in sorted(forms)]
        out[d] = [(a, orbit_size(params, a)) for a in level]
    return out


def grid_cells(params) -> list:
    if params.kind == "matrix":
        return [(i, j) for i in range(params.n) for j in range(params.p)]
    if params.kind == "square":
        return [(i, j) for i in range(params.n) for j in range(params.n)]
    return [(k, m, j) for m in range(params.M) for k in range(params.K) for j in range(params.p)]


def enumerate_naive(params, D: int, max_terms: int = 10 ** 5) -> Iterator[MultiIndex]:
    """Every multi-index with 1 <= |alpha| <= D on the full grid."""
    cells = grid_cells(params)
    total = sum(math.comb(len(cells) + d - 1, d) for d in range(1, D + 1))
    if total > max_terms:
        raise SizeLimitError(f"naive enumeration has {total} multi-indices (cap {max_terms})")
    for d in range(1, D + 1):
        for combo in itertools.combinations_with_replacement(cells, d):
            yield MultiIndex.from_cells(combo, params.kind)


# --- Schramm-Wein lower bound -------------------------------------------

@dataclass
class SWReport:
    model: str
    params: dict
    D: int
    lower_bound: Fraction
    mmse_lower_bound: Fraction
    variance: Fraction
    mass_by_degree: list
    n_terms: int
    filtered_terms: int
    evaluated: int

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "D": self.D,
            "lower_bound": float(self.lower_bound),
            "mmse_lower_bound": float(self.mmse_lower_bound),
            "variance": float(self.variance),
            "mass_by_degree": [float(m) for m in self.mass_by_degree],
            "n_terms": self.n_terms,
            "filtered_terms": self.filtered_terms,
        }


def sw_bound(params, D: int, max_terms: int = MAX_SW_TERMS, naive: bool = False) -> SWReport:
    """Var(x) minus the sum of kappa^2 / alpha! over nonzero |alpha| <= D.

    Multi-indices are grouped into orbits of the model symmetries unless
    ``naive`` is set.  ``lower_bound`` is on the scale of x; for seriation
    ``mmse_lower_bound`` converts to the per-entry matrix risk.
    """
    if not 0 <= D <= MAX_SW_DEGREE:
        raise SizeLimitError(f"D must be in [0, {MAX_SW_DEGREE}]")
    mean = kappa_exact(params, {})
    variance = mean - mean * mean
    mass = [Fraction(0)] * (D + 1)
    n_terms = filtered = evaluated = 0
    if naive:
        groups = ((a, 1) for a in enumerate_naive(params, D, max_terms))
    else:
        orbits = enumerate_orbits(params, D) if D else {}
        groups = (pair for d in sorted(orbits) for pair in orbits[d])
    for alpha, size in groups:
        if nullity_filter(params, alpha):
            filtered += size
            continue
        evaluated += 1
        if evaluated > max_terms:
            raise SizeLimitError(f"more than {max_terms} cumulants to evaluate")
        n_terms += size
        k = kappa_exact(params, alpha)
        mass[alpha.degree] += size * k * k / alpha.factorial
    lower = variance - sum(mass)
    if params.model == "seriation":
        mmse = params.lam ** 2 * Fraction(params.n - 1, params.n) * lower
    else:
        mmse = lower
    return SWReport(params.model, params_to_dict(params), D, lower, mmse, variance,
                    mass, n_terms, filtered, evaluated)


# --- closed-form lower bounds -------------------------------------------

def closed_form_bound(params, D: int, scale: float = 1.0) -> float:
    """Asymptotic low-degree MMSE lower bound evaluated at finite size.

    Same units as ``SWReport.mmse_lower_bound``.  Raises PreconditionError
    naming the first violated hypothesis.  ``scale`` multiplies the
    correction term (negative controls only).
    """
    lam = float(params.lam)
    if D < 1:
        raise PreconditionError("D >= 1 required")
    if params.model == "mfm":
        K, M, p = params.K, params.M, params.p
        if K < 2 * (D + 2) ** 2:
            raise PreconditionError(f"K >= 2(D+2)^2 fails (K={K}, D={D})")
        zeta = 64 * D ** 40 * lam ** 4 * p * max(1.0, M / K)
        if zeta >= 1:
            raise PreconditionError(f"zeta < 1 fails (zeta={zeta})")
        corr = 64 * (D + 1) * D ** 36 * zeta / (1 - math.sqrt(zeta))
        return 1 / K - (1 + scale * corr) / K ** 2
    if params.model == "clustering":
        n, K, p = params.n, params.K, params.p
        if p < n / K ** 2:
            raise PreconditionError(f"p >= n/K^2 fails (p={p}, n={n}, K={K})")
        if n < max(2 * (D + 2) ** 2 * K, (D + 2) ** 4):
            raise PreconditionError(f"n >= max(2(D+2)^2 K, (D+2)^4) fails (n={n})")
        if K < D + 2:
            raise PreconditionError(f"K >= D+2 fails (K={K}, D={D})")
        dbar4 = (lam * lam * p) ** 2
        zeta = dbar4 / p * D ** 22 * (D + 2) ** 2 * max(1.0, n / K ** 2)
        if zeta >= 1:
            raise PreconditionError(f"zeta < 1 fails (zeta={zeta})")
        corr = 18 * D ** 21 * zeta / (1 - math.sqrt(zeta))
        return 1 / K - (1 + scale * corr) / K ** 2
    n, rho = params.n, params.rho
    if n < 2 * (2 * D + 2) ** 2:
        raise PreconditionError(f"n >= 2(2D+2)^2 fails (n={n}, D={D})")
    zeta = 2 ** 12 * lam ** 2 * (D + 1) ** 42 * max(1.0, 4 * rho ** 2 / n)
    if zeta >= 1:
        raise PreconditionError(f"zeta < 1 fails (zeta={zeta})")
    ph = 2 * rho / (n - 1) * (1 - (rho + 1) / (2 * n))
    z = max(zeta, 1 / n)
    corr = 2 ** 18 * rho ** 2 / (n - 1) ** 2 * (D + 1) ** 44 * z / (1 - z)
    return lam ** 2 * n / (n - 1) * (ph * (1 - ph) - scale * corr)


def mfm_lam_for_zeta(zeta: float, D: int, K: int, M: int, p: int) -> float:
    """The signal scale at which the feature-matching zeta takes a given value."""
    return (zeta / (64 * D ** 40 * p * max(1.0, M / K))) ** 0.25


# --- empirical low-degree fit -------------------------------------------

@dataclass
class EmpiricalReport:
    mse: float
    se: float
    n_features: int
    n_samples: int
    rank: int
    warning: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def sample_observations(params, n_samples: int, rng: np.random.Generator):
    """Bulk draws of (flattened observation, target) under unit noise."""
    lam = float(params.lam)
    N = n_samples
    if params.model == "mfm":
        K, M, p = params.K, params.M, params.p
        lat = np.argsort(rng.random((N, M, K)), axis=2)
        means = lam * standard_normal(rng, (N, K, p))
        sig = np.take_along_axis(means[:, None, :, :], lat[:, :, :, None], axis=2)  # (N, M, K, p)
        Y = sig.transpose(0, 2, 1, 3) + standard_normal(rng, (N, K, M, p))
        x = (lat[:, 0, 0] == lat[:, 1, 0]).astype(float)
    elif params.model == "clustering":
        n, K, p = params.n, params.K, params.p
        labels = np.argsort(rng.random((N, n)), axis=1) // (n // K)
        means = lam * standard_normal(rng, (N, K, p))
        Y = np.take_along_axis(means, labels[:, :, None], axis=1) + standard_normal(rng, (N, n, p))
        x = (labels[:, 0] == labels[:, 1]).astype(float)
    else:
        n, rho = params.n, params.rho
        pos = np.argsort(rng.random((N, n)), axis=1)
        X = lam * (np.abs(pos[:, :, None] - pos[:, None, :]) <= rho)
        Y = X + standard_normal(rng, (N, n, n))
        x = (np.abs(pos[:, 0] - pos[:, 1]) <= rho).astype(float)
    return Y.reshape(N, -1), x


def monomial_features(Z: np.ndarray, D: int) -> np.ndarray:
    """All monomials of degree <= D in the columns of Z, constant first."""
    N, F = Z.shape
    cols = [np.ones(N)]
    for d in range(1, D + 1):
        for combo in itertools.combinations_with_replacement(range(F), d):
            cols.append(np.prod(Z[:, combo], axis=1))
    return np.column_stack(cols)


def n_monomials(F: int, D: int) -> int:
    return math.comb(F + D, D)


def empirical_lowdeg_mse(params, D: int, n_samples: int, seed: int = 0,
                         n_boot: int = 200) -> EmpiricalReport:
    """Held-out MSE of the least-squares degree-D polynomial predictor of x.

    Half of the draws fit the coefficients (pivoted QR least squares), the
    other half measure the squared error; the standard error is bootstrapped
    over the held-out residuals.
    """
    rng = make_rng(seed)
    F = len(grid_cells(params))
    n_feat = n_monomials(F, D)
    if n_feat > MAX_FEATURES:
        raise SizeLimitError(f"{n_feat} monomial features exceed {MAX_FEATURES}")
    if n_samples < 10 * n_feat:
        raise SizeLimitError(f"need at least {10 * n_feat} samples for {n_feat} features")
    Z, x = sample_observations(params, n_samples, rng)
    A = monomial_features(Z, D)
    half = n_samples // 2
    coef, _, rank, _ = scipy.linalg.lstsq(A[:half], x[:half], lapack_driver="gelsy")
    warning = None
    if rank < n_feat:
        warning = f"ill-conditioned fit: numerical rank {rank} < {n_feat} features"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    resid2 = (A[half:] @ coef - x[half:]) ** 2
    mse = float(resid2.mean())
    boots = [resid2[rng.integers(0, len(resid2), len(resid2))].mean() for _ in range(n_boot)]
    se = float(np.std(boots, ddof=1))
    return EmpiricalReport(mse, se, n_feat, n_samples, int(rank), warning)
