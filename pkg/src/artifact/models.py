"""Planted models: multiple feature matching, seriation, balanced clustering.

Indexing is 0-based everywhere.  Latent conventions:

* feature matching: ``latent[m, k]`` is the label of row k in dataset m
  (each row of ``latent`` is a permutation of range(K)); items are (k, m).
* seriation: ``latent[i]`` is the position of item i (a permutation of
  range(n)); X[i, j] = lam when |latent[i] - latent[j]| <= rho.
* clustering: ``latent[i]`` is the group of item i; each group has n/K items.

The two anchor items carrying the estimated entry x are (0, 0), (0, 1) for
feature matching and 0, 1 otherwise.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from . import bandcount
from .assignment import max_agreement
from .combinatorics import _UnionFind, falling_factorial, partitions_of
from .errors import ConfigError, DomainError, SizeLimitError

MAX_CONSTRAINED_ITEMS = 12


# --- randomness ----------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Box-Muller on the uniform stream, so draws depend only on PCG64 doubles."""
    size = (size,) if isinstance(size, int) else tuple(size)
    count = int(np.prod(size)) if size else 1
    half = (count + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:count]
    return z.reshape(size)


def fisher_yates(rng: np.random.Generator, values) -> np.ndarray:
    """Uniform shuffle of a copy of ``values``."""
    arr = np.array(values, copy=True)
    for i in range(len(arr) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        arr[i], arr[j] = arr[j], arr[i]
    return arr


# --- configurations and instances ---------------------------------------

@dataclass(frozen=True)
class MFMConfig:
    K: int
    M: int
    p: int
    delta_bar: float
    sigma: float = 1.0

    @property
    def lam(self) -> float:
        """Per-coordinate standard deviation of the means."""
        return math.sqrt(self.delta_bar ** 2 * self.sigma ** 2 / self.p)


@dataclass(frozen=True)
class SeriationConfig:
    n: int
    rho: int
    lam: float


@dataclass(frozen=True)
class ClusteringConfig:
    n: int
    K: int
    p: int
    delta_bar: float
    sigma: float = 1.0

    @property
    def lam(self) -> float:
        return math.sqrt(self.delta_bar ** 2 * self.sigma ** 2 / self.p)


@dataclass
class MFMInstance:
    config: MFMConfig
    seed: int
    latent: np.ndarray  # (M, K)
    means: np.ndarray  # (K, p)
    Y: np.ndarray  # (K, M, p)


@dataclass
class SeriationInstance:
    config: SeriationConfig
    seed: int
    latent: np.ndarray  # (n,)
    X: np.ndarray
    Y: np.ndarray


@dataclass
class ClusteringInstance:
    config: ClusteringConfig
    seed: int
    latent: np.ndarray  # (n,)
    means: np.ndarray  # (K, p)
    Y: np.ndarray  # (n, p)


def sample_mfm(cfg: MFMConfig, seed: int) -> MFMInstance:
    if cfg.K < 2 or cfg.M < 2 or cfg.p < 1:
        raise ConfigError("feature matching needs K >= 2, M >= 2, p >= 1")
    if cfg.sigma < 0 or cfg.delta_bar < 0:
        raise ConfigError("sigma and delta_bar must be nonnegative")
    rng = make_rng(seed)
    latent = np.stack([fisher_yates(rng, np.arange(cfg.K)) for _ in range(cfg.M)])
    means = cfg.lam * standard_normal(rng, (cfg.K, cfg.p))
    noise = standard_normal(rng, (cfg.K, cfg.M, cfg.p))
    Y = means[latent.T] + cfg.sigma * noise
    return MFMInstance(cfg, int(seed), latent, means, Y)


def band_matrix(positions, lam, rho: int) -> np.ndarray:
    """lam * 1{|positions[i] - positions[j]| <= rho}."""
    pos = np.asarray(positions)
    return lam * (np.abs(pos[:, None] - pos[None, :]) <= rho).astype(float)


def sample_seriation(cfg: SeriationConfig, seed: int) -> SeriationInstance:
    """The diagonal of Y is generated too but carries no information."""
    if cfg.n < 2 or cfg.rho < 1:
        raise ConfigError("seriation needs n >= 2 and rho >= 1")
    rng = make_rng(seed)
    latent = fisher_yates(rng, np.arange(cfg.n))
    X = band_matrix(latent, cfg.lam, cfg.rho)
    Y = X + standard_normal(rng, (cfg.n, cfg.n))
    return SeriationInstance(cfg, int(seed), latent, X, Y)


def sample_balanced(cfg: ClusteringConfig, seed: int) -> ClusteringInstance:
    if cfg.K < 2 or cfg.n % cfg.K:
        raise ConfigError("clustering needs K >= 2 dividing n")
    rng = make_rng(seed)
    latent = fisher_yates(rng, np.repeat(np.arange(cfg.K), cfg.n // cfg.K))
    means = cfg.lam * standard_normal(rng, (cfg.K, cfg.p))
    Y = means[latent] + cfg.sigma * standard_normal(rng, (cfg.n, cfg.p))
    return ClusteringInstance(cfg, int(seed), latent, means, Y)


MODEL_NAMES = ("mfm", "seriation", "clustering")
_CONFIGS = {"mfm": MFMConfig, "seriation": SeriationConfig, "clustering": ClusteringConfig}
_SAMPLERS = {"mfm": sample_mfm, "seriation": sample_seriation, "clustering": sample_balanced}


def make_config(model: str, params: dict):
    if model not in _CONFIGS:
        raise ConfigError(f"unknown model {model!r}; choose from {MODEL_NAMES}")
    cls = _CONFIGS[model]
    names = [f for f in cls.__dataclass_fields__]
    unknown = set(params) - set(names)
    if unknown:
        raise ConfigError(f"unknown parameters for {model}: {sorted(unknown)}")
    try:
        kwargs = {}
        for f in names:
            if f in params:
                kind = cls.__dataclass_fields__[f].type
                kwargs[f] = int(params[f]) if kind == "int" else float(params[f])
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"incomplete parameters for {model}: {exc}") from None


def config_params(cfg) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def model_name(cfg) -> str:
    for name, cls in _CONFIGS.items():
        if isinstance(cfg, cls):
            return name
    raise DomainError(f"not a model config: {cfg!r}")


def sample(cfg, seed: int):
    return _SAMPLERS[model_name(cfg)](cfg, seed)


# --- serialization -------------------------------------------------------

def instance_to_dict(inst) -> dict:
    """{model, dims, seed, params, latent, arrays} with row-major flat arrays."""
    name = model_name(inst.config)
    arrays = {"Y": inst.Y}
    if name == "seriation":
        arrays["X"] = inst.X
    else:
        arrays["means"] = inst.means
    return {
        "model": name,
        "dims": {k: list(v.shape) for k, v in arrays.items()},
        "seed": inst.seed,
        "params": config_params(inst.config),
        "latent": np.asarray(inst.latent).tolist(),
        "arrays": {k: [float(x) for x in v.ravel()] for k, v in arrays.items()},
    }


def instance_from_dict(d: dict):
    cfg = make_config(d["model"], d["params"])
    arrays = {k: np.array(v, dtype=float).reshape(d["dims"][k]) for k, v in d["arrays"].items()}
    latent = np.array(d["latent"], dtype=np.int64)
    if d["model"] == "seriation":
        return SeriationInstance(cfg, d["seed"], latent, arrays["X"], arrays["Y"])
    if d["model"] == "mfm":
        return MFMInstance(cfg, d["seed"], latent, arrays["means"], arrays["Y"])
    return ClusteringInstance(cfg, d["seed"], latent, arrays["means"], arrays["Y"])


def instance_to_json(inst) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True)


def instance_from_json(text: str):
    return instance_from_dict(json.loads(text))


# --- simple quantities ---------------------------------------------------

def phi(n: int, rho: int) -> Fraction:
    """P(|pi(0) - pi(1)| <= rho) for a uniform permutation of range(n)."""
    if not 1 <= rho <= n - 1:
        raise DomainError("phi needs 1 <= rho <= n - 1")
    return Fraction(2 * rho, n - 1) * (1 - Fraction(rho + 1, 2 * n))


def partnership(labels) -> np.ndarray:
    """0/1 matrix of label agreement.

    A 2-D ``labels`` array (M, K) is a feature-matching latent; items are
    then ordered dataset-major, item (k, m) at index m*K + k.
    """
    lab = np.asarray(labels)
    flat = lab.ravel()
    return (flat[:, None] == flat[None, :]).astype(np.int64)


def err_perm(pi_hat, pi_star) -> Fraction:
    """Fraction of mismatched items after the best global relabeling."""
    a, b = np.asarray(pi_hat), np.asarray(pi_star)
    if a.shape != b.shape or a.ndim != 2:
        raise DomainError("both arguments must be (M, K) arrays of permutations")
    M, K = a.shape
    for arr in (a, b):
        if any(sorted(row) != list(range(K)) for row in arr.tolist()):
            raise DomainError("every row must be a permutation of range(K)")
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (a.ravel(), b.ravel()), 1)
    _, best = max_agreement(counts)
    return 1 - Fraction(best, K * M)


def err_part(g_hat, g_star, K: int | None = None) -> Fraction:
    """(1/2n) min over relabelings of sum_k |G*_k sym-diff G^_psi(k)|."""
    a, b = np.asarray(g_hat), np.asarray(g_star)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("label vectors must have equal length")
    n = len(a)
    K = K or int(max(a.max(), b.max())) + 1
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (a, b), 1)
    _, best = max_agreement(counts)
    # |A sym-diff B| = |A| + |B| - 2|A & B| summed over matched groups
    return 1 - Fraction(best, n)


# --- latent priors and exact moments ------------------------------------

@dataclass(frozen=True)
class MFMPrior:
    K: int
    M: int

    def items(self):
        return [(k, m) for m in range(self.M) for k in range(self.K)]

    def enumerate(self) -> Iterator[dict]:
        perms = list(itertools.permutations(range(self.K)))
        for combo in itertools.product(perms, repeat=self.M):
            yield {(k, m): combo[m][k] for m in range(self.M) for k in range(self.K)}


@dataclass(frozen=True)
class BalancedPrior:
    n: int
    K: int

    def items(self):
        return list(range(self.n))

    def enumerate(self) -> Iterator[dict]:
        base = sorted(np.repeat(np.arange(self.K), self.n // self.K).tolist())
        for lab in _distinct_permutations(base):
            yield dict(enumerate(lab))


@dataclass(frozen=True)
class SeriationPrior:
    n: int
    rho: int

    def items(self):
        return list(range(self.n))

    def enumerate(self) -> Iterator[dict]:
        for perm in itertools.permutations(range(self.n)):
            yield dict(enumerate(perm))


def _distinct_permutations(seq: list) -> Iterator[tuple]:
    seq = sorted(seq)
    while True:
        yield tuple(seq)
        i = len(seq) - 2
        while i >= 0 and seq[i] >= seq[i + 1]:
            i -= 1
        if i < 0:
            return
        j = len(seq) - 1
        while seq[j] <= seq[i]:
            j -= 1
        seq[i], seq[j] = seq[j], seq[i]
        seq[i + 1:] = reversed(seq[i + 1:])


def satisfies(prior, assignment: dict, constraints) -> bool:
    for c in constraints:
        kind, u, v = c
        if kind == "eq" and assignment[u] != assignment[v]:
            return False
        if kind == "fix" and assignment[u] != v:
            return False
        if kind == "band" and abs(assignment[u] - assignment[v]) > prior.rho:
            return False
    return True


def exhaustive_moment(prior, constraints) -> Fraction:
    """P(constraints) by enumerating every latent configuration."""
    hits = total = 0
    for a in prior.enumerate():
        total += 1
        hits += satisfies(prior, a, constraints)
    return Fraction(hits, total)


def _constrained_items(constraints) -> list:
    items: list = []
    for kind, u, v in constraints:
        for it in ((u, v) if kind in ("eq", "band") else (u,)):
            if it not in items:
                items.append(it)
    return items


def latent_moment(prior, constraints) -> Fraction:
    """Exact probability that the latent satisfies every constraint.

    Constraints are tuples ("eq", u, v) for equal labels, ("fix", u, a) for
    label/position a, and ("band", u, v) for |pos(u) - pos(v)| <= rho
    (seriation only).
    """
    constraints = list(constraints)
    items = _constrained_items(constraints)
    if len(items) > MAX_CONSTRAINED_ITEMS:
        raise SizeLimitError(f"at most {MAX_CONSTRAINED_ITEMS} constrained items")
    if isinstance(prior, SeriationPrior):
        return _seriation_moment(prior, items, constraints)
    if isinstance(prior, (MFMPrior, BalancedPrior)):
        return _label_moment(prior, items, constraints)
    raise DomainError(f"unsupported prior {prior!r}")


def _seriation_moment(prior: SeriationPrior, items: list, constraints) -> Fraction:
    if not items:
        return Fraction(1)
    where = {it: i for i, it in enumerate(items)}
    edges, fixed = [], {}
    for kind, u, v in constraints:
        if kind == "eq":
            if u != v:
                return Fraction(0)
        elif kind == "band":
            edges.append((where[u], where[v]))
        elif kind == "fix":
            if fixed.get(where[u], v) != v:
                return Fraction(0)
            fixed[where[u]] = v
        else:
            raise DomainError(f"unknown constraint {kind!r}")
    count = bandcount.count_placements(prior.n, prior.rho, len(items), edges, fixed)
    return Fraction(count, falling_factorial(prior.n, len(items)))


def _label_moment(prior, items: list, constraints) -> Fraction:
    if not items:
        return Fraction(1)
    is_mfm = isinstance(prior, MFMPrior)
    K = prior.K
    uf = _UnionFind(items)
    fixes: dict = {}
    for kind, u, v in constraints:
        if kind == "eq":
            uf.union(u, v)
        elif kind == "fix":
            if not 0 <= v < K:
                return Fraction(0)
            if fixes.get(u, v) != v:
                return Fraction(0)
            fixes[u] = v
        else:
            raise DomainError(f"constraint {kind!r} does not apply to label models")
    # pinned items sharing a label are forced into one block
    by_label: dict = {}
    for u, a in fixes.items():
        if a in by_label:
            uf.union(by_label[a], u)
        else:
            by_label[a] = u
    blocks: dict = {}
    for it in items:
        blocks.setdefault(uf.find(it), []).append(it)
    block_list = []
    for members in blocks.values():
        labels = {fixes[u] for u in members if u in fixes}
        if len(labels) > 1:
            return Fraction(0)
        block_list.append((members, labels.pop() if labels else None))
    if is_mfm:
        for members, _ in block_list:
            datasets = [m for _, m in members]
            if len(set(datasets)) < len(datasets):
                return Fraction(0)
    n_fixed = len({lab for _, lab in block_list if lab is not None})
    total = Fraction(0)
    # a grouping of blocks into label classes; each class gets one label
    for part in partitions_of(range(len(block_list))):
        fixed_labels = 0
        ok = True
        sizes = []
        for group in part:
            labs = {block_list[b][1] for b in group} - {None}
            if len(labs) > 1:
                ok = False
                break
            fixed_labels += len(labs)
            members = [u for b in group for u in block_list[b][0]]
            if is_mfm:
                datasets = [m for _, m in members]
                if len(set(datasets)) < len(datasets):
                    ok = False
                    break
            sizes.append(len(members))
        if not ok:
            continue
        free = len(part) - fixed_labels
        ways = falling_factorial(K - n_fixed, free)
        if ways == 0:
            continue
        if is_mfm:
            total += ways
        else:
            q = prior.n // K
            total += ways * math.prod(falling_factorial(q, s) for s in sizes)
    if is_mfm:
        per_dataset: dict = {}
        for _, m in items:
            per_dataset[m] = per_dataset.get(m, 0) + 1
        den = math.prod(falling_factorial(K, c) for c in per_dataset.values())
        return total / den
    return total / falling_factorial(prior.n, len(items))
