import itertools
import math
import re
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import DomainError, PreconditionError, SizeLimitError
from artifact.lowdeg import (
    ClusteringParams,
    MFMParams,
    SeriationParams,
    closed_form_bound,
    empirical_lowdeg_mse,
    enumerate_naive,
    enumerate_orbits,
    grid_cells,
    kappa_bound,
    kappa_exact,
    kappa_hypothesis,
    kappa_report,
    mfm_lam_for_zeta,
    nullity_filter,
    sw_bound,
)
from artifact.models import phi

from oracles import kappa_by_raw_moments

SMALL = {
    "mfm": MFMParams(3, 2, 1, Fraction(1, 2)),
    "clustering": ClusteringParams(6, 3, 2, Fraction(2, 3)),
    "seriation": SeriationParams(5, 1, Fraction(3, 4)),
}
DIMS = {"mfm": {"K": 3, "M": 2}, "clustering": {"n": 6, "K": 3}, "seriation": {"n": 5, "rho": 1}}


def alphas(model, max_degree=4):
    cells = grid_cells(SMALL[model])
    return st.lists(st.sampled_from(cells), min_size=1, max_size=max_degree)


def test_nullity_examples():
    p = ClusteringParams(12, 3, 2, 1)
    assert nullity_filter(p, [(0, 0), (1, 0), (2, 1)])
    assert nullity_filter(p, [(0, 0), (1, 0), (2, 1), (3, 1), (4, 0), (5, 2)])
    assert not nullity_filter(p, {(0, 0): 2})
    assert not nullity_filter(MFMParams(3, 2, 1, 1), [(0, 0, 0), (0, 1, 0)])
    # dataset 2 touched once
    assert nullity_filter(MFMParams(3, 3, 1, 1), [(0, 0, 0), (0, 1, 0), (1, 2, 0), (1, 0, 0)])
    assert nullity_filter(SeriationParams(5, 1, 1), [(2, 2), (0, 1)])
    with pytest.raises(DomainError):
        nullity_filter(p, {})


@pytest.mark.parametrize("model", sorted(SMALL))
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_null_alphas_have_zero_kappa(model, data):
    params = SMALL[model]
    cells = data.draw(alphas(model))
    if nullity_filter(params, cells):
        assert kappa_exact(params, cells) == 0


@pytest.mark.parametrize("model", sorted(SMALL))
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_kappa_matches_raw_moment_oracle(model, data):
    params = SMALL[model]
    cells = data.draw(alphas(model))
    expected = kappa_by_raw_moments(model, DIMS[model], params.lam, sorted(cells))
    assert kappa_exact(params, cells) == expected


def test_kappa_examples():
    p = ClusteringParams(12, 3, 2, 1)
    assert kappa_exact(p, [(0, 0), (1, 0), (2, 0)]) == 0
    # first cumulant is P(two items share a group) at finite n
    assert kappa_exact(p, {}) == Fraction(12 // 3 - 1, 12 - 1)
    lam = Fraction(2, 5)
    mfm = MFMParams(3, 2, 1, lam)
    assert kappa_exact(mfm, {(0, 0, 0): 1, (0, 1, 0): 1}) == lam ** 2 * Fraction(1, 3) * Fraction(2, 3)


def test_kappa_size_limits():
    p = ClusteringParams(30, 3, 1, 1)
    with pytest.raises(SizeLimitError):
        kappa_exact(p, {(0, 0): 10})
    with pytest.raises(DomainError):
        kappa_exact(p, [(40, 0), (1, 0)])


def test_kappa_size_limit_on_items():
    p = SeriationParams(30, 2, 1)
    cells = [(2 * t, 2 * t + 1) for t in range(1, 7)]
    with pytest.raises(SizeLimitError):
        kappa_exact(p, cells)


def test_report_fields():
    p = MFMParams(72, 2, 2, Fraction(1, 3))
    rep = kappa_report(p, {(0, 0, 0): 1, (0, 1, 0): 1})
    assert rep.preconditions_met and not rep.null
    assert abs(rep.exact) <= rep.bound
    # a single pairing, so the largest per-pairing cumulant is the whole sum
    assert rep.exact == p.lam ** 2 * rep.c_alpha


def test_bound_examples():
    p = ClusteringParams(96, 3, 4, 1)
    assert kappa_bound(p, {(0, 0): 1, (1, 0): 1}) == 4 * 2 ** 19 * Fraction(1, 3)
    a = {(0, 1): 1, (1, 2): 1}
    s1, s2 = SeriationParams(72, 2, Fraction(1, 3)), SeriationParams(72, 2, Fraction(2, 3))
    assert kappa_bound(s2, a) == 2 ** 2 * kappa_bound(s1, a)
    m1, m5 = MFMParams(72, 2, 1, 1), MFMParams(72, 2, 5, 1)
    b = {(2, 0, 0): 2, (2, 1, 0): 2}
    assert kappa_bound(m1, b) == kappa_bound(m5, b)


def test_bound_preconditions():
    p = ClusteringParams(96, 3, 4, 1)
    assert "n >= 2(|alpha|+2)^2 K" in kappa_hypothesis(p, {(0, 0): 4})
    with pytest.raises(PreconditionError):
        kappa_bound(p, {(0, 0): 4})
    with pytest.raises(PreconditionError):
        kappa_bound(MFMParams(7, 2, 1, 1), {(0, 0, 0): 1, (0, 1, 0): 1})


@pytest.mark.parametrize("model", ["mfm", "seriation"])
def test_bounds_hold_on_low_degree_grid(model):
    params = {"mfm": MFMParams(72, 2, 2, 1), "seriation": SeriationParams(72, 2, 1)}[model]
    checked = 0
    for d, reps in enumerate_orbits(params, 2).items():
        for alpha, _ in reps:
            if nullity_filter(params, alpha) or kappa_hypothesis(params, alpha):
                continue
            assert abs(kappa_exact(params, alpha)) <= kappa_bound(params, alpha)
            checked += 1
    assert checked > 0


def _alpha_factorial(cells):
    return math.prod(math.factorial(c) for c in Counter(cells).values())


def sw_by_oracle(model, dims, params, D):
    mean = kappa_by_raw_moments(model, dims, params.lam, [])
    total = mean - mean * mean
    cells = grid_cells(params)
    for d in range(1, D + 1):
        for combo in itertools.combinations_with_replacement(cells, d):
            k = kappa_by_raw_moments(model, dims, params.lam, list(combo))
            total -= k * k / _alpha_factorial(combo)
    return total


@pytest.mark.parametrize("model, params, dims, D", [
    ("mfm", MFMParams(3, 2, 1, Fraction(1, 2)), {"K": 3, "M": 2}, 2),
    ("clustering", ClusteringParams(6, 3, 1, Fraction(1, 2)), {"n": 6, "K": 3}, 2),
])
def test_sw_matches_oracle_sum(model, params, dims, D):
    assert sw_bound(params, D).lower_bound == sw_by_oracle(model, dims, params, D)


def test_seriation_sw_example():
    n, rho, lam = 6, 1, Fraction(1, 10)
    params = SeriationParams(n, rho, lam)
    rep = sw_bound(params, 2)
    assert rep.lower_bound == sw_by_oracle("seriation", {"n": n, "rho": rho}, params, 2)
    f = phi(n, rho)
    assert rep.variance == f * (1 - f)
    assert rep.lower_bound <= f * (1 - f)
    assert rep.mmse_lower_bound <= lam ** 2 * f * (1 - f) * Fraction(n, n - 1)


def test_sw_degree_zero_is_variance():
    rep = sw_bound(MFMParams(4, 2, 1, 1), 0)
    assert rep.lower_bound == Fraction(3, 16)
    assert rep.to_dict()["lower_bound"] == 0.1875


@pytest.mark.parametrize("params", [
    MFMParams(4, 2, 1, 0),
    ClusteringParams(6, 2, 2, 0),
    SeriationParams(6, 2, 0),
])
@pytest.mark.parametrize("D", [1, 2, 3])
def test_sw_without_signal_is_variance(params, D):
    rep = sw_bound(params, D)
    assert rep.lower_bound == rep.variance
    assert rep.variance == sw_bound(params, 0).lower_bound


@pytest.mark.parametrize("params", [
    MFMParams(4, 3, 1, Fraction(1, 2)),
    ClusteringParams(6, 3, 2, Fraction(1, 2)),
    SeriationParams(6, 1, Fraction(1, 3)),
])
def test_sw_non_increasing_in_degree(params):
    values = [sw_bound(params, D).lower_bound for D in range(4)]
    assert all(b <= a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("params, D", [
    (MFMParams(3, 2, 1, 1), 3),
    (MFMParams(2, 3, 2, 1), 2),
    (ClusteringParams(4, 2, 2, 1), 3),
    (ClusteringParams(6, 3, 1, 1), 4),
    (SeriationParams(4, 1, 1), 3),
    (SeriationParams(5, 2, 1), 2),
])
def test_orbits_match_naive_enumeration(params, D):
    orbits = enumerate_orbits(params, D)
    naive = Counter(a.degree for a in enumerate_naive(params, D))
    for d in range(1, D + 1):
        assert sum(size for _, size in orbits[d]) == naive[d]
    assert sw_bound(params, D).lower_bound == sw_bound(params, D, naive=True).lower_bound


def test_sw_limits():
    with pytest.raises(SizeLimitError):
        sw_bound(MFMParams(4, 2, 1, 1), 5)
    with pytest.raises(SizeLimitError):
        sw_bound(MFMParams(6, 2, 1, 1), 2, max_terms=1)
    with pytest.raises(SizeLimitError):
        list(enumerate_naive(SeriationParams(40, 2, 1), 4))


def test_mfm_closed_form_example():
    lam = mfm_lam_for_zeta(0.01, 1, 32, 2, 1)
    value = closed_form_bound(MFMParams(32, 2, 1, lam), 1)
    expected = 1 / 32 - (1 / 1024) * (1 + 128 * 0.01 / (1 - 0.1))
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(0.0288845, abs=1e-6)


def test_closed_form_vanishing_correction():
    assert closed_form_bound(MFMParams(32, 2, 1, 1e-12), 1) == pytest.approx(1 / 32 - 1 / 1024, abs=1e-15)
    assert closed_form_bound(ClusteringParams(81, 3, 9, 1e-12), 1) == pytest.approx(1 / 3 - 1 / 9, abs=1e-15)


def test_seriation_closed_form_uses_one_over_n():
    n, rho, D = 40, 2, 1
    lam = 1e-20
    ph = float(phi(n, rho))
    z = 1 / n
    corr = 2 ** 18 * rho ** 2 / (n - 1) ** 2 * 2 ** 44 * z / (1 - z)
    expected = lam ** 2 * n / (n - 1) * (ph * (1 - ph) - corr)
    assert closed_form_bound(SeriationParams(n, rho, lam), D) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("params, D, fragment", [
    (MFMParams(16, 2, 1, 1e-6), 1, "K >= 2(D+2)^2"),
    (MFMParams(32, 2, 1, 1.0), 1, "zeta < 1"),
    (ClusteringParams(81, 3, 1, 1e-6), 1, "p >= n/K^2"),
    (ClusteringParams(54, 3, 6, 1e-6), 1, "n >= max"),
    (ClusteringParams(96, 2, 24, 1e-6), 1, "K >= D+2"),
    (SeriationParams(20, 2, 1e-9), 1, "n >= 2(2D+2)^2"),
    (SeriationParams(40, 2, 1.0), 1, "zeta < 1"),
    (MFMParams(32, 2, 1, 1e-6), 0, "D >= 1"),
])
def test_closed_form_preconditions(params, D, fragment):
    with pytest.raises(PreconditionError, match=re.escape(fragment)):
        closed_form_bound(params, D)


@pytest.mark.parametrize("D", [1, 2])
def test_mfm_sw_dominates_closed_form(D):
    lam = mfm_lam_for_zeta(0.01, D, 32, 2, 1)
    params = MFMParams(32, 2, 1, lam)
    assert float(sw_bound(params, D).lower_bound) >= closed_form_bound(params, D)


@pytest.mark.xfail(strict=True, reason="finite-n variance of the co-membership indicator "
                                       "is below 1/K - 1/K^2")
def test_clustering_sw_dominates_closed_form():
    params = ClusteringParams(81, 3, 9, 1e-6)
    assert float(sw_bound(params, 1).lower_bound) >= closed_form_bound(params, 1)


def test_empirical_degree_zero_is_variance():
    params = MFMParams(3, 2, 1, 1)
    rep = empirical_lowdeg_mse(params, 0, 20_000, seed=1)
    var = float(sw_bound(params, 0).variance)
    assert rep.n_features == 1 and rep.warning is None
    assert abs(rep.mse - var) <= 4 * rep.se


@pytest.mark.parametrize("params", [MFMParams(3, 2, 1, 0), SeriationParams(4, 1, 0)])
def test_empirical_without_signal_is_variance(params):
    rep = empirical_lowdeg_mse(params, 1, 20_000, seed=2)
    var = float(sw_bound(params, 0).variance)
    assert abs(rep.mse - var) <= 4 * rep.se


def test_empirical_above_sw_bound():
    params = MFMParams(3, 2, 1, Fraction(1, 1))
    sw = float(sw_bound(params, 2).lower_bound)
    rep = empirical_lowdeg_mse(params, 2, 40_000, seed=3)
    assert rep.mse >= sw - 4 * rep.se


def test_empirical_limits():
    with pytest.raises(SizeLimitError):
        empirical_lowdeg_mse(MFMParams(3, 2, 1, 1), 1, 50)
    with pytest.raises(SizeLimitError):
        empirical_lowdeg_mse(SeriationParams(20, 2, 1), 3, 10 ** 6)


def test_empirical_is_deterministic():
    params = ClusteringParams(4, 2, 1, 1)
    a = empirical_lowdeg_mse(params, 1, 2000, seed=4)
    b = empirical_lowdeg_mse(params, 1, 2000, seed=4)
    assert a == b
