"""Estimators for the three planted models and their risks.

Conventions follow :mod:`artifact.models`: a seriation permutation maps
item -> position, a feature-matching estimate is an (M, K) array whose row m
maps the rows of dataset m to labels.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assignment import max_agreement, min_cost_assignment
from .errors import DomainError, SizeLimitError
from .models import band_matrix, fisher_yates, make_rng

MAX_LS_N = 10
MAX_EXACT_CONFIGS = 10 ** 7


@dataclass
class EstimatorResult:
    estimate: np.ndarray
    objective: float
    iterations: int
    wall_time: float
    history: list = field(default_factory=list)


# --- seriation -----------------------------------------------------------

def threshold_seriation(Y: np.ndarray, lam: float) -> np.ndarray:
    """lam * 1{Y > lam / 2} entrywise."""
    if lam <= 0:
        raise DomainError("lam must be positive")
    return lam * (np.asarray(Y) > lam / 2)


def lex_permutations(n: int) -> np.ndarray:
    """All permutations of range(n) in lexicographic order, shape (n!, n)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    sub = lex_permutations(n - 1)
    blocks = []
    for first in range(n):
        rest = np.array([v for v in range(n) if v != first], dtype=np.int8)
        head = np.full((len(sub), 1), first, dtype=np.int8)
        blocks.append(np.hstack([head, rest[sub]]))
    return np.vstack(blocks)


def ls_seriation(Y: np.ndarray, lam: float, rho: int, chunk: int = 20000):
    """Brute-force least squares over positions; returns (perm, X_perm, objective).

    Reversing every position gives the same band matrix, so only the
    lexicographically smaller member of each reversal pair is scored.  The
    first maximizer in lexicographic order wins ties.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if Y.shape != (n, n):
        raise DomainError("Y must be square")
    if n > MAX_LS_N:
        raise SizeLimitError(f"least-squares seriation limited to n <= {MAX_LS_N}")
    if rho < 1:
        raise DomainError("rho must be at least 1")
    perms = lex_permutations(n)
    if n > 1:
        rev = (n - 1) - perms
        diff = perms != rev
        first = diff.argmax(axis=1)
        rows = np.arange(len(perms))
        perms = perms[perms[rows, first] < rev[rows, first]]
    # ||Y - X_pi||^2 = const - 2 lam sum_{ij} Y_ij B_pi,ij since ||X_pi|| is fixed
    band = (np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]) <= rho).astype(float)
    best_score, best = -np.inf, None
    for start in range(0, len(perms), chunk):
        P = perms[start:start + chunk].astype(np.intp)
        B = band[P[:, :, None], P[:, None, :]]
        scores = np.einsum("cij,ij->c", B, Y)
        i = int(np.argmax(scores))
        if scores[i] > best_score:
            best_score, best = scores[i], P[i].copy()
    X_hat = band_matrix(best, lam, rho)
    return best, X_hat, float(np.sum((Y - X_hat) ** 2))


def toeplitz_estimator(perm, lam: float, rho: int, n: int) -> np.ndarray:
    """lam/2 on the band of an estimated position vector, 0 elsewhere."""
    if rho < 1:
        raise DomainError("rho must be at least 1")
    perm = np.asarray(perm)
    if perm.shape != (n,):
        raise DomainError("perm must have length n")
    return band_matrix(perm, lam / 2, rho)


def risk(X_hat: np.ndarray, X: np.ndarray, normalization: str = "n2") -> float:
    """Squared Frobenius distance, divided by n^2 ("n2"), n(n-1) off the
    diagonal ("offdiag"), or not at all ("sum")."""
    D = (np.asarray(X_hat, dtype=float) - np.asarray(X, dtype=float)) ** 2
    n = D.shape[0]
    if normalization == "n2":
        return float(D.sum() / n ** 2)
    if normalization == "offdiag":
        return float((D.sum() - np.trace(D)) / (n * (n - 1)))
    if normalization == "sum":
        return float(D.sum())
    raise DomainError(f"unknown normalization {normalization!r}")


# --- multiple feature matching ------------------------------------------

def _check_tuple(pi: np.ndarray, K: int, M: int) -> np.ndarray:
    pi = np.asarray(pi)
    if pi.shape != (M, K) or any(sorted(r) != list(range(K)) for r in pi.tolist()):
        raise DomainError("pi must be an (M, K) array of permutations")
    return pi


def group_rows(pi: np.ndarray) -> np.ndarray:
    """inv[m, c] = row of dataset m carrying label c."""
    return np.argsort(pi, axis=1)


def crit_mfm(Y: np.ndarray, pi) -> float:
    """Sum over labels and datasets of squared distances to the label mean."""
    K, M, _ = Y.shape
    pi = _check_tuple(pi, K, M)
    inv = group_rows(pi)
    groups = Y[inv.T, np.arange(M)[None, :]]  # (K labels, M, p)
    centers = groups.mean(axis=1, keepdims=True)
    return float(np.sum((groups - centers) ** 2))


def kmeans_mfm_exact(Y: np.ndarray, max_configs: int = MAX_EXACT_CONFIGS) -> EstimatorResult:
    """Global minimizer of crit_mfm with dataset 0 fixed to the identity.

    Crit = sum ||Y||^2 - (1/M) sum_c ||S_c||^2 with S_c the label sums, so the
    search maximizes sum over dataset pairs of cross inner products.
    """
    t0 = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    K, M, _ = Y.shape
    n_perm = math.factorial(K)
    if n_perm ** (M - 1) > max_configs:
        raise SizeLimitError(f"(K!)^(M-1) = {n_perm ** (M - 1)} exceeds {max_configs}")
    perms = lex_permutations(K).astype(np.intp)  # candidate inverses: label -> row
    ident = np.arange(K)
    # T[m, m'][a, b] = sum_c <Y[perm_a(c), m], Y[perm_b(c), m']>
    total = np.zeros((n_perm,) * (M - 1))
    for m in range(M):
        for m2 in range(m + 1, M):
            G = Y[:, m, :] @ Y[:, m2, :].T
            if m == 0:
                table = G[ident[None, :], perms].sum(axis=1)
                shape = [1] * (M - 1)
                shape[m2 - 1] = n_perm
                total = total + table.reshape(shape)
            else:
                table = G[perms[:, None, :], perms[None, :, :]].sum(axis=2)
                shape = [1] * (M - 1)
                shape[m - 1] = shape[m2 - 1] = n_perm
                total = total + table.reshape(shape)
    flat = int(np.argmax(total))
    idx = np.unravel_index(flat, total.shape) if M > 1 else ()
    inv = np.vstack([ident] + [perms[i] for i in idx])
    pi = np.argsort(inv, axis=1)
    return EstimatorResult(pi, crit_mfm(Y, pi), 1, time.perf_counter() - t0)


def _random_tuple(rng: np.random.Generator, K: int, M: int) -> np.ndarray:
    return np.stack([fisher_yates(rng, np.arange(K)) for _ in range(M)])


def kmeans_mfm_alt(Y: np.ndarray, restarts: int = 10, max_iter: int = 100, tol: float = 1e-10,
                   seed: int = 0) -> EstimatorResult:
    """Alternate label means and per-dataset optimal assignments.

    Keeps the best of ``restarts`` random starts; ``history`` holds the
    criterion after every iteration of the winning run.
    """
    t0 = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    K, M, _ = Y.shape
    rng = make_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        pi = _random_tuple(rng, K, M)
        history = [crit_mfm(Y, pi)]
        it = 0
        for it in range(1, max_iter + 1):
            inv = group_rows(pi)
            centers = Y[inv.T, np.arange(M)[None, :]].mean(axis=1)  # (K, p)
            new = np.empty_like(pi)
            for m in range(M):
                cost = ((Y[:, m, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
                new[m] = min_cost_assignment(cost)
            value = crit_mfm(Y, new)
            if value > history[-1]:
                # assignment ties can only move within float noise
                value, new = history[-1], pi
            pi = new
            prev = history[-1]
            history.append(value)
            if prev - value <= tol * max(prev, 1e-300):
                break
        if best is None or history[-1] < best[1][-1]:
            best = (pi, history, it)
    pi, history, it = best
    return EstimatorResult(pi, history[-1], it, time.perf_counter() - t0, history)


def round_to_permutations(labels: np.ndarray, K: int) -> np.ndarray:
    """Turn per-row cluster indices (M, K) into a permutation tuple.

    Each dataset independently takes the bijection agreeing with the most
    cluster indices.
    """
    labels = np.asarray(labels)
    out = np.empty_like(labels)
    for m, row in enumerate(labels):
        counts = np.zeros((K, K), dtype=np.int64)
        counts[np.arange(K), row] = 1
        out[m], _ = max_agreement(counts)
    return out


# --- balanced clustering ------------------------------------------------

def kmeans_objective(Y: np.ndarray, labels: np.ndarray, K: int) -> float:
    total = 0.0
    for k in range(K):
        pts = Y[labels == k]
        if len(pts):
            total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total


def balanced_lloyd(Y: np.ndarray, K: int, restarts: int = 10, max_iter: int = 100,
                   seed: int = 0) -> EstimatorResult:
    """Lloyd iterations whose assignment step fills n/K slots per center."""
    t0 = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if K < 1 or n % K:
        raise DomainError("K must divide n")
    size = n // K
    rng = make_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        labels = fisher_yates(rng, np.repeat(np.arange(K), size))
        history = [kmeans_objective(Y, labels, K)]
        it = 0
        for it in range(1, max_iter + 1):
            centers = np.stack([Y[labels == k].mean(axis=0) for k in range(K)])
            cost = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            slots = min_cost_assignment(np.repeat(cost, size, axis=1))
            new = np.asarray(slots) // size
            value = kmeans_objective(Y, new, K)
            if value >= history[-1]:
                break
            labels = new
            history.append(value)
        if best is None or history[-1] < best[1][-1]:
            best = (labels, history, it)
    labels, history, it = best
    return EstimatorResult(labels, history[-1], it, time.perf_counter() - t0, history)
