"""Randomized inequality and equivalence suites shared by the CLI and the tests.

Every suite takes a seed and returns a :class:`SuiteResult`; violations carry
a JSON-ready description of the offending instance.  ``scale`` multiplies the
bound under test and exists for negative-control runs.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .cumulants import MomentSpec, closed_form_oracle, core_bound, feray_recursion, joint_cumulant
from .lowdeg import (
    ClusteringParams,
    MFMParams,
    SeriationParams,
    enumerate_orbits,
    kappa_bound,
    kappa_exact,
    kappa_hypothesis,
    nullity_filter,
)
from .models import BalancedPrior, MFMPrior, SeriationPrior, latent_moment, satisfies
from .series import (
    Order,
    TruncatedBivariateSeries,
    build_lstar,
    order_cmp,
    order_inf,
    p_delta_minus_one,
    poly_graph_order,
    reciprocal_one_plus,
    series_order,
    spec_family,
)

MAX_REPORTED = 20


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    skipped: int = 0
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations and self.checked > 0

    def fail(self, record: dict) -> None:
        if len(self.violations) < MAX_REPORTED:
            self.violations.append(record)
        self.details["n_violations"] = self.details.get("n_violations", 0) + 1

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "skipped": self.skipped,
            "n_violations": self.details.get("n_violations", 0),
            "violations": self.violations,
            "details": {k: v for k, v in self.details.items() if k != "n_violations"},
            "seconds": round(self.seconds, 3),
        }


def _s(v) -> str:
    return str(v)


# --- random generators ---------------------------------------------------

def _random_fraction(rng: random.Random, hi: Fraction, den: int = 64) -> Fraction:
    return hi * Fraction(rng.randint(0, den), den)


def _random_family(rng: random.Random, items: list, count: int, min_size: int = 1) -> list:
    """Up to ``count`` disjoint subsets of ``items`` with at least min_size elements."""
    pool = items[:]
    rng.shuffle(pool)
    out = []
    for _ in range(count):
        if len(pool) < min_size:
            break
        size = rng.randint(min_size, len(pool))
        out.append(frozenset(pool[:size]))
        pool = pool[size:]
    return out


def random_spec(rng: random.Random, l_max: int = 4, L_max: int = 8, with_b: bool | None = None,
                admissible: bool = True) -> MomentSpec:
    """A random quasi-factorized moment family.

    With ``admissible`` the parameters satisfy the hypotheses of
    :func:`core_bound` for the chosen branch.
    """
    l = rng.randint(1, l_max)
    L = rng.randint(l, L_max)
    owner = list(range(l)) + [rng.randrange(l) for _ in range(L - l)]
    rng.shuffle(owner)
    I_sets = [frozenset(i for i in range(L) if owner[i] == t) for t in range(l)]
    A_sets = _random_family(rng, list(range(L)), rng.randint(0, 2), 2)
    if with_b is None:
        with_b = rng.random() < 0.5
    B_sets = _random_family(rng, list(range(L)), rng.randint(1, 2), 2) if with_b else []
    if with_b and not B_sets:
        B_sets = [frozenset(range(L))] if L >= 2 else [frozenset({0})]
    eta = Fraction(rng.randint(1, 8), 8)
    if admissible:
        if B_sets:
            y0 = _random_fraction(rng, Fraction(1, 2 * L * L))
            x0 = _random_fraction(rng, y0 / 2)
        else:
            x0 = _random_fraction(rng, Fraction(1, 2 * L * L))
            y0 = _random_fraction(rng, Fraction(1, 2 * L * L))
    else:
        x0 = Fraction(rng.randint(0, 8), 32)
        y0 = Fraction(rng.randint(0, 8), 32)
    return MomentSpec(eta, x0, y0, tuple(I_sets), tuple(A_sets), tuple(B_sets))


def spec_to_dict(spec: MomentSpec) -> dict:
    return {
        "eta": _s(spec.eta), "x0": _s(spec.x0), "y0": _s(spec.y0),
        "I_sets": [sorted(s) for s in spec.I_sets],
        "A_sets": [sorted(s) for s in spec.A_sets],
        "B_sets": [sorted(s) for s in spec.B_sets],
    }


def random_series(rng: random.Random, cap: int, max_deg: int, zero_const: bool = False,
                  n_terms: int = 4) -> TruncatedBivariateSeries:
    coeffs = {}
    for _ in range(rng.randint(1, n_terms)):
        t = rng.randint(1 if zero_const else 0, max_deg)
        s = rng.randint(0, t)
        coeffs[(s, t - s)] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
    return TruncatedBivariateSeries(cap, coeffs)


def random_constraints(rng: random.Random, prior, n_max: int = 4) -> list:
    items = prior.items()
    out = []
    for _ in range(rng.randint(1, n_max)):
        r = rng.random()
        u, v = rng.choice(items), rng.choice(items)
        if isinstance(prior, SeriationPrior):
            if r < 0.6:
                out.append(("band", u, v))
            elif r < 0.8:
                out.append(("eq", u, v))
            else:
                out.append(("fix", u, rng.randrange(prior.n)))
        else:
            if r < 0.7:
                out.append(("eq", u, v))
            else:
                out.append(("fix", u, rng.randrange(prior.K)))
    return out


# --- suites --------------------------------------------------------------

def core_bound_suite(n_cases: int = 200, seed: int = 0, scale=1) -> SuiteResult:
    """|exact cumulant| <= core_bound on random admissible specs, both branches."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    res = SuiteResult("core-bound")
    branches = {"r=0": 0, "r>=1": 0}
    for case in range(n_cases):
        spec = random_spec(rng, with_b=case % 2 == 1)
        exact = joint_cumulant(closed_form_oracle(spec), spec.l)
        bound = core_bound(spec) * scale
        branches["r>=1" if spec.r else "r=0"] += 1
        res.checked += 1
        if abs(exact) > bound:
            res.fail({"spec": spec_to_dict(spec), "cumulant": _s(exact), "bound": _s(bound)})
    res.details["branches"] = branches
    res.seconds = time.perf_counter() - t0
    return res


def feray_suite(r_max: int = 8) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("feray")
    values = {}
    for r in range(1, r_max + 1):
        c = feray_recursion(r)
        values[r] = c
        res.checked += 1
        if c > r ** (6 * r):
            res.fail({"r": r, "C_r": c, "bound": r ** (6 * r)})
    res.details["C"] = values
    res.seconds = time.perf_counter() - t0
    return res


def basic_order_suite(n_cases: int = 500, seed: int = 0, cap: int = 10) -> SuiteResult:
    """Product, sum and reciprocal order rules on random exact series."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    res = SuiteResult("order-basic")
    half = cap // 2
    for _ in range(n_cases):
        f = random_series(rng, cap, half)
        g = random_series(rng, cap, half)
        of, og = series_order(f), series_order(g)
        checks = {
            "product": series_order(f * g).geq(of + og),
            "sum": series_order(f + g).geq(order_inf([of, og])),
        }
        h = random_series(rng, cap, half, zero_const=True)
        r = reciprocal_one_plus(h) - TruncatedBivariateSeries.constant(1, cap)
        checks["reciprocal"] = order_cmp(series_order(r), series_order(h)) == "equal"
        res.checked += 1
        for name, ok in checks.items():
            if not ok:
                res.fail({"rule": name, "f": _series_dict(f), "g": _series_dict(g), "h": _series_dict(h)})
    res.seconds = time.perf_counter() - t0
    return res


def _series_dict(f: TruncatedBivariateSeries) -> dict:
    return {f"{s},{sp}": _s(c) for (s, sp), c in sorted(f.coeffs.items())}


def quasi_factorized_order_suite(n_cases: int = 100, seed: int = 0, cap: int = 10) -> SuiteResult:
    """ord(P_delta[u] - 1) dominates the order of the induced dependency graph,
    and the dependency graph order has the expected lower bounds."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    res = SuiteResult("order-quasi-factorized")
    graph_checks = 0
    for _ in range(n_cases):
        spec = random_spec(rng, l_max=4, L_max=8, admissible=False)
        fam = spec_family(spec, cap)
        g = build_lstar(spec)
        for size in range(2, spec.l + 1):
            for delta in itertools.combinations(range(spec.l), size):
                lhs = series_order(p_delta_minus_one(fam, delta, cap))
                rhs = poly_graph_order(g.induced(delta))
                res.checked += 1
                if not lhs.geq(rhs):
                    res.fail({"spec": spec_to_dict(spec), "delta": list(delta),
                              "series_order": list(lhs), "graph_order": list(rhs)})
        d = poly_graph_order(g)
        if not d.is_infinite:
            graph_checks += 1
            if d.s < spec.b_graph_components() - 1 or d.total < spec.l - 1:
                res.fail({"spec": spec_to_dict(spec), "graph_order": list(d),
                          "b_components": spec.b_graph_components()})
    res.details["graph_checks"] = graph_checks
    res.seconds = time.perf_counter() - t0
    return res


def falling_product_family(a: tuple, cap: int):
    """delta -> prod_{i=1}^{sum a_delta - 1} (1 - i x)."""

    def family(delta):
        total = sum(a[t] for t in delta)
        out = TruncatedBivariateSeries.constant(1, cap)
        for i in range(1, total):
            out = out * TruncatedBivariateSeries(cap, {(0, 0): Fraction(1), (1, 0): Fraction(-i)})
        return out

    return family


def falling_product_suite(max_entry: int = 3, max_size: int = 4, cap: int = 10) -> SuiteResult:
    """ord(P_delta[v] - 1) >= (|delta| - 1, 0) for every a-vector on the grid."""
    t0 = time.perf_counter()
    res = SuiteResult("order-falling-product")
    for size in range(1, max_size + 1):
        for a in itertools.product(range(1, max_entry + 1), repeat=size):
            fam = falling_product_family(a, cap)
            o = series_order(p_delta_minus_one(fam, range(size), cap))
            res.checked += 1
            if not o.geq(Order(size - 1, 0)):
                res.fail({"a": list(a), "order": list(o)})
    res.seconds = time.perf_counter() - t0
    return res


def order_lemma_suite(seed: int = 0) -> SuiteResult:
    parts = [basic_order_suite(seed=seed), quasi_factorized_order_suite(seed=seed), falling_product_suite()]
    res = SuiteResult("order-lemma")
    for p in parts:
        res.checked += p.checked
        for v in p.violations:
            res.fail(dict(v, part=p.name))
        res.details[p.name] = {"checked": p.checked, "violations": p.details.get("n_violations", 0)}
        res.seconds += p.seconds
    return res


KAPPA_GRIDS = {
    "clustering": ClusteringParams(96, 3, 4, 1),
    "mfm": MFMParams(72, 2, 2, 1),
    "seriation": SeriationParams(72, 2, 1),
}


def kappa_bound_suite(max_degree: int = 4, scale=1, grids: dict | None = None) -> SuiteResult:
    """|kappa_exact| <= kappa_bound for every symmetry class of non-null alpha
    whose hypotheses hold.  Counts are reported per class and per alpha."""
    t0 = time.perf_counter()
    res = SuiteResult("kappa-bound")
    for name, params in (grids or KAPPA_GRIDS).items():
        stats = {"classes_checked": 0, "alphas_checked": 0, "classes_null": 0,
                 "classes_hypothesis_failed": 0, "alphas_hypothesis_failed": 0, "null_nonzero": 0}
        for d, reps in enumerate_orbits(params, max_degree).items():
            for alpha, size in reps:
                if nullity_filter(params, alpha):
                    stats["classes_null"] += 1
                    continue
                if kappa_hypothesis(params, alpha):
                    stats["classes_hypothesis_failed"] += 1
                    stats["alphas_hypothesis_failed"] += size
                    res.skipped += 1
                    continue
                k = kappa_exact(params, alpha)
                b = kappa_bound(params, alpha) * scale
                stats["classes_checked"] += 1
                stats["alphas_checked"] += size
                res.checked += 1
                if abs(k) > b:
                    res.fail({"model": name, "alpha": [[list(c), m] for c, m in alpha.entries],
                              "kappa": _s(k), "bound": _s(b)})
        res.details[name] = stats
    res.seconds = time.perf_counter() - t0
    return res


MOMENT_PRIORS = {
    "mfm": MFMPrior(3, 3),
    "clustering": BalancedPrior(6, 3),
    "seriation": SeriationPrior(7, 2),
}


def moment_oracle_suite(n_cases: int = 200, seed: int = 0, priors: dict | None = None) -> SuiteResult:
    """latent_moment against exhaustive enumeration of the latent variable."""
    t0 = time.perf_counter()
    rng = random.Random(seed)
    res = SuiteResult("moment-oracle")
    for name, prior in (priors or MOMENT_PRIORS).items():
        configs = list(prior.enumerate())
        nonzero = 0
        for _ in range(n_cases):
            cons = random_constraints(rng, prior)
            fast = latent_moment(prior, cons)
            slow = _enumerated(prior, configs, cons)
            nonzero += fast != 0
            res.checked += 1
            if fast != slow:
                res.fail({"model": name, "constraints": [list(map(_jsonable, c)) for c in cons],
                          "latent_moment": _s(fast), "enumerated": _s(slow)})
        res.details[name] = {"cases": n_cases, "nonzero": nonzero, "configurations": len(configs)}
    res.seconds = time.perf_counter() - t0
    return res


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _enumerated(prior, configs: list, cons: list) -> Fraction:
    return Fraction(sum(satisfies(prior, a, cons) for a in configs), len(configs))


SUITES = {
    "core-bound": lambda cfg: core_bound_suite(cfg.get("n_cases", 200), cfg.get("seed", 0),
                                               Fraction(cfg.get("bound_scale", 1))),
    "order-lemma": lambda cfg: order_lemma_suite(cfg.get("seed", 0)),
    "kappa-bound": lambda cfg: kappa_bound_suite(cfg.get("max_degree", 4),
                                                 Fraction(cfg.get("bound_scale", 1))),
    "moment-oracle": lambda cfg: moment_oracle_suite(cfg.get("n_cases", 200), cfg.get("seed", 0)),
}
