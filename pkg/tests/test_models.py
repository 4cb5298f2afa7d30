import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import ConfigError, DomainError, SizeLimitError
from artifact.models import (
    BalancedPrior,
    ClusteringConfig,
    MFMConfig,
    MFMPrior,
    SeriationConfig,
    SeriationPrior,
    err_part,
    err_perm,
    exhaustive_moment,
    fisher_yates,
    instance_from_json,
    instance_to_json,
    latent_moment,
    make_config,
    make_rng,
    partnership,
    phi,
    sample,
    sample_balanced,
    sample_mfm,
    sample_seriation,
    standard_normal,
)
from artifact.suites import moment_oracle_suite, random_constraints

from oracles import err_part_bruteforce, err_perm_bruteforce, phi_by_counting


def test_zero_signal_zero_noise_gives_zero_observations():
    inst = sample_mfm(MFMConfig(3, 2, 4, 0.0, 0.0), seed=5)
    assert not inst.Y.any()


@pytest.mark.parametrize("cfg", [
    MFMConfig(4, 3, 2, 1.5),
    SeriationConfig(7, 2, 1.0),
    ClusteringConfig(9, 3, 2, 2.0),
])
def test_sampling_is_deterministic(cfg):
    a, b = sample(cfg, 123), sample(cfg, 123)
    assert np.array_equal(a.latent, b.latent)
    assert a.Y.tobytes() == b.Y.tobytes()
    assert sample(cfg, 124).Y.tobytes() != a.Y.tobytes()


def test_mfm_structure():
    cfg = MFMConfig(5, 3, 2, 1.0, 0.5)
    inst = sample_mfm(cfg, 0)
    assert inst.Y.shape == (5, 3, 2)
    for row in inst.latent:
        assert sorted(row) == list(range(5))
    noiseless = sample_mfm(MFMConfig(5, 3, 2, 1.0, 0.0), 0)
    for m in range(3):
        for k in range(5):
            assert np.array_equal(noiseless.Y[k, m], noiseless.means[noiseless.latent[m, k]])
    assert cfg.lam == pytest.approx(math.sqrt(1.0 * 0.25 / 2))


def test_mfm_mean_is_zero_by_monte_carlo():
    cfg = MFMConfig(2, 2, 1, 1.0)
    draws = np.array([sample_mfm(cfg, s).Y.ravel() for s in range(100_000)])
    se = math.sqrt(cfg.lam ** 2 + cfg.sigma ** 2) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0)) <= 4 * se)


def test_seriation_full_band():
    inst = sample_seriation(SeriationConfig(6, 5, 2.5), 1)
    assert np.all(inst.X == 2.5)


def test_seriation_band_matches_latent():
    inst = sample_seriation(SeriationConfig(9, 2, 1.0), 4)
    pos = inst.latent
    for i in range(9):
        for j in range(9):
            assert inst.X[i, j] == (1.0 if abs(pos[i] - pos[j]) <= 2 else 0.0)


def test_seriation_band_probability_by_monte_carlo():
    n, rho, N = 5, 1, 100_000
    cfg = SeriationConfig(n, rho, 1.0)
    hits = sum(sample_seriation(cfg, s).X[0, 1] for s in range(N))
    p = float(phi(n, rho))
    assert abs(hits / N - p) <= 4 * math.sqrt(p * (1 - p) / N)


@pytest.mark.parametrize("seed", range(20))
def test_balanced_histogram_exact(seed):
    inst = sample_balanced(ClusteringConfig(12, 4, 3, 1.0), seed)
    assert np.bincount(inst.latent, minlength=4).tolist() == [3, 3, 3, 3]


def test_balanced_shuffle_is_uniform():
    rng = make_rng(0)
    counts: dict = {}
    N = 60_000
    for _ in range(N):
        key = tuple(fisher_yates(rng, [0, 0, 1, 1]))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    p = 1 / 6
    for c in counts.values():
        assert abs(c / N - p) <= 4 * math.sqrt(p * (1 - p) / N)


def test_box_muller_moments():
    z = standard_normal(make_rng(9), 200_001)
    assert z.shape == (200_001,)
    assert abs(z.mean()) <= 4 / math.sqrt(len(z))
    assert abs(z.var() - 1) <= 4 * math.sqrt(2 / len(z))


@pytest.mark.parametrize("model, params", [
    ("mfm", {"K": 1, "M": 2, "p": 1, "delta_bar": 1}),
    ("seriation", {"n": 5, "rho": 0, "lam": 1}),
    ("clustering", {"n": 7, "K": 3, "p": 1, "delta_bar": 1}),
])
def test_invalid_dims_rejected(model, params):
    with pytest.raises(ConfigError):
        sample(make_config(model, params), 0)


def test_make_config_errors():
    with pytest.raises(ConfigError):
        make_config("ising", {})
    with pytest.raises(ConfigError):
        make_config("mfm", {"K": 2})
    with pytest.raises(ConfigError):
        make_config("seriation", {"n": 4, "rho": 1, "lam": 1, "extra": 2})


@pytest.mark.parametrize("cfg", [
    MFMConfig(3, 2, 2, 1.0),
    SeriationConfig(5, 1, 2.0),
    ClusteringConfig(6, 2, 3, 1.0),
])
def test_json_round_trip(cfg):
    inst = sample(cfg, 77)
    back = instance_from_json(instance_to_json(inst))
    assert back.config == inst.config and back.seed == inst.seed
    assert np.array_equal(back.latent, inst.latent)
    assert np.array_equal(back.Y, inst.Y)
    assert instance_to_json(back) == instance_to_json(inst)


@pytest.mark.parametrize("n, rho, expected", [
    (5, 1, Fraction(2, 5)),
    (5, 4, Fraction(1)),
    (10, 2, Fraction(17, 45)),
])
def test_phi_examples(n, rho, expected):
    assert phi(n, rho) == expected


@pytest.mark.parametrize("n", range(2, 12))
def test_phi_matches_pair_count(n):
    for rho in range(1, n):
        assert phi(n, rho) == phi_by_counting(n, rho)


@pytest.mark.parametrize("n, rho", [(5, 0), (5, 5)])
def test_phi_domain(n, rho):
    with pytest.raises(DomainError):
        phi(n, rho)


def test_partnership_examples():
    K, M = 3, 2
    ident = np.tile(np.arange(K), (M, 1))
    G = partnership(ident)
    for k in range(K):
        for m, m2 in itertools.product(range(M), repeat=2):
            assert G[m * K + k, m2 * K + k] == 1
    assert np.array_equal(partnership(np.arange(5)), np.eye(5, dtype=int))
    rand = partnership(sample_balanced(ClusteringConfig(9, 3, 1, 1.0), 2).latent)
    assert np.array_equal(rand, rand.T) and np.all(np.diag(rand) == 1)


def test_err_perm_examples():
    rng = np.random.default_rng(0)
    star = np.stack([rng.permutation(4) for _ in range(3)])
    assert err_perm(star, star) == 0
    psi = np.array([2, 0, 3, 1])
    assert err_perm(psi[star], star) == 0
    star = np.array([[0, 1, 2], [0, 1, 2]])
    hat = np.array([[0, 1, 2], [1, 0, 2]])
    assert err_perm(hat, star) == Fraction(1, 3)
    with pytest.raises(DomainError):
        err_perm(hat, star[:1])
    with pytest.raises(DomainError):
        err_perm(np.array([[0, 0, 2], [0, 1, 2]]), star)


def test_err_part_examples():
    g = np.array([0, 0, 1, 1, 2, 2])
    assert err_part(g, g) == 0
    assert err_part((g + 1) % 3, g) == 0
    moved = np.array([0, 1, 1, 1, 2, 2])
    assert err_part(moved, g) == Fraction(1, 6)
    with pytest.raises(DomainError):
        err_part(g[:5], g)


def _random_tuple(rng, K, M):
    return np.stack([rng.permutation(K) for _ in range(M)])


@pytest.mark.parametrize("K", range(2, 7))
def test_err_perm_matches_bruteforce(K):
    rng = np.random.default_rng(K)
    for _ in range(30):
        M = int(rng.integers(1, 4))
        a, b = _random_tuple(rng, K, M), _random_tuple(rng, K, M)
        assert err_perm(a, b) == err_perm_bruteforce(a.tolist(), b.tolist())


@pytest.mark.parametrize("K", range(2, 7))
def test_err_part_matches_bruteforce(K):
    rng = np.random.default_rng(100 + K)
    for _ in range(30):
        n = K * int(rng.integers(1, 4))
        a = rng.integers(0, K, n)
        b = rng.permutation(np.repeat(np.arange(K), n // K))
        assert err_part(a, b, K) == err_part_bruteforce(a.tolist(), b.tolist(), K)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_err_perm_triangle_and_gauge(K, M, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_tuple(rng, K, M) for _ in range(3))
    assert err_perm(a, c) <= err_perm(a, b) + err_perm(b, c)
    psi = rng.permutation(K)
    assert err_perm(psi[a], b) == err_perm(a, b)
    assert 0 <= err_perm(a, b) <= 1


def _gamma_gap(a, b) -> int:
    return int(((partnership(a) - partnership(b)) ** 2).sum())


def _balanced_pairs(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        K = int(rng.integers(2, 6))
        n = K * int(rng.integers(1, 5))
        base = np.repeat(np.arange(K), n // K)
        star = rng.permutation(base)
        hat = star.copy()
        # mix close and far pairs so both regimes are exercised
        for _ in range(int(rng.integers(0, n))):
            i, j = rng.integers(0, n, 2)
            hat[i], hat[j] = hat[j], hat[i]
        yield K, n, hat, star


def test_partition_gap_at_most_twice_err_part():
    for K, n, hat, star in _balanced_pairs(1000, 1):
        lhs = Fraction(_gamma_gap(hat, star), n * (n - 1)) if n > 1 else 0
        assert lhs <= 2 * err_part(hat, star, K)


def test_clustering_hardness_inequality():
    for K, n, hat, star in _balanced_pairs(1000, 2):
        e = err_part(hat, star, K)
        assert (1 - e) ** 2 <= 1 - Fraction(K * _gamma_gap(hat, star), 2 * n * n)


def test_feature_matching_hardness_inequality():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        K, M = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        star = _random_tuple(rng, K, M)
        hat = star.copy()
        for m in range(M):
            if rng.random() < 0.5:
                hat[m] = rng.permutation(K)
        e = err_perm(hat, star)
        assert (1 - e) ** 2 <= 1 - Fraction(_gamma_gap(hat, star), 2 * K * M * M)


@pytest.mark.parametrize("prior, constraints, expected", [
    (SeriationPrior(4, 1), [("fix", 0, 2)], Fraction(1, 4)),
    (MFMPrior(3, 2), [("eq", (0, 0), (0, 1))], Fraction(1, 3)),
    (SeriationPrior(5, 1), [("band", 0, 1)], Fraction(2, 5)),
    (BalancedPrior(6, 3), [("eq", 0, 1)], Fraction(1, 5)),
])
def test_latent_moment_examples(prior, constraints, expected):
    assert latent_moment(prior, constraints) == expected
    assert exhaustive_moment(prior, constraints) == expected


def test_latent_moment_contradictions_are_zero():
    assert latent_moment(MFMPrior(3, 2), [("eq", (0, 0), (1, 0))]) == 0
    assert latent_moment(MFMPrior(3, 2), [("fix", (0, 0), 1), ("fix", (1, 0), 1)]) == 0
    assert latent_moment(SeriationPrior(5, 1), [("fix", 0, 0), ("fix", 1, 3), ("band", 0, 1)]) == 0
    assert latent_moment(BalancedPrior(4, 2), [("eq", 0, 1), ("eq", 1, 2)]) == 0


def test_latent_moment_limits():
    cons = [("eq", i, i + 1) for i in range(13)]
    with pytest.raises(SizeLimitError):
        latent_moment(BalancedPrior(28, 2), cons)
    with pytest.raises(DomainError):
        latent_moment(MFMPrior(3, 2), [("band", (0, 0), (1, 0))])


@pytest.mark.parametrize("prior", [MFMPrior(3, 2), MFMPrior(2, 3), BalancedPrior(6, 2),
                                   BalancedPrior(6, 3), SeriationPrior(6, 1), SeriationPrior(6, 2)])
def test_latent_moment_matches_enumeration(prior):
    rng = random.Random(str(prior))
    for _ in range(40):
        cons = random_constraints(rng, prior)
        assert latent_moment(prior, cons) == exhaustive_moment(prior, cons), cons


def test_moment_oracle_suite_small():
    res = moment_oracle_suite(n_cases=30, seed=5)
    assert res.checked == 90 and res.violations == []
