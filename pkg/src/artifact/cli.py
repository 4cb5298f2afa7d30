"""Command-line entry points: verify, mmse, simulate, sweep.

Configuration is a JSON file (``--config``) merged with ``--set key=value``
overrides; dotted keys reach into nested objects and values are parsed as
JSON when possible.  Dedicated flags win over both.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 size-limit abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import estimators as est
from .errors import ConfigError, DomainError, PreconditionError, SizeLimitError
from .lowdeg import (
    ClusteringParams,
    MFMParams,
    SeriationParams,
    closed_form_bound,
    empirical_lowdeg_mse,
    mfm_lam_for_zeta,
    sw_bound,
)
from .models import config_params, err_part, err_perm, instance_to_json, make_config, sample
from .suites import SUITES

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SIZE = 0, 1, 2, 3

PARAM_ORDER = {
    "mfm": ("K", "M", "p", "delta_bar", "sigma"),
    "seriation": ("n", "rho", "lam"),
    "clustering": ("n", "K", "p", "delta_bar", "sigma"),
}
ESTIMATORS = {
    "mfm": ("exact", "alt"),
    "seriation": ("threshold", "ls"),
    "clustering": ("lloyd",),
}
CSV_COLUMNS_TAIL = ("trial", "seed", "estimator", "error", "objective", "runtime_ms")


# --- configuration -------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        target = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key!r} goes through a non-object")
        target[parts[-1]] = _parse_value(value)
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def worker_count() -> int:
    raw = os.environ.get("ARTIFACT_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ARTIFACT_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def _emit(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- verify --------------------------------------------------------------

def run_verify(suite: str, cfg: dict) -> tuple[int, dict]:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    result = SUITES[suite](cfg)
    report = result.to_dict()
    return (EXIT_OK if result.passed else EXIT_FAIL), report


# --- mmse ----------------------------------------------------------------

def lowdeg_params(model: str, params: dict, D: int = 1):
    """Parameters at unit noise; feature matching also accepts ``zeta`` in place of ``lam``."""
    params = dict(params)
    try:
        if model == "mfm":
            if "zeta" in params:
                params["lam"] = mfm_lam_for_zeta(float(params.pop("zeta")), max(D, 1), int(params["K"]),
                                                 int(params["M"]), int(params["p"]))
            return MFMParams(int(params["K"]), int(params["M"]), int(params["p"]), _num(params["lam"]))
        if model == "clustering":
            return ClusteringParams(int(params["n"]), int(params["K"]), int(params["p"]), _num(params["lam"]))
        if model == "seriation":
            return SeriationParams(int(params["n"]), int(params["rho"]), _num(params["lam"]))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc.args[0]!r} for {model}") from None
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown model {model!r}")


def _num(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


def run_mmse(cfg: dict) -> dict:
    model = _require(cfg, "model")
    D = int(_require(cfg, "D"))
    params = lowdeg_params(model, _require(cfg, "params"), D)
    report = {"sw_bound": sw_bound(params, D).to_dict()}
    try:
        report["closed_form_bound"] = closed_form_bound(params, D, float(cfg.get("bound_scale", 1)))
    except PreconditionError as exc:
        report["closed_form_bound"] = None
        report["closed_form_error"] = str(exc)
    if cfg.get("empirical"):
        emp = empirical_lowdeg_mse(params, int(cfg.get("empirical_degree", D)),
                                   int(cfg.get("n_samples", 100000)), int(cfg.get("seed", 0)))
        report["empirical"] = emp.to_dict()
    return report


# --- simulate ------------------------------------------------------------

def run_estimator(model: str, name: str, inst, seed: int) -> tuple[float, float]:
    """(error, objective) of one estimator on one instance."""
    cfg = inst.config
    if model == "seriation":
        if name == "threshold":
            X_hat = est.threshold_seriation(inst.Y, cfg.lam)
            return est.risk(X_hat, inst.X), float(np.sum((inst.Y - X_hat) ** 2))
        if name == "ls":
            _, X_hat, obj = est.ls_seriation(inst.Y, cfg.lam, cfg.rho)
            return est.risk(X_hat, inst.X), obj
    elif model == "mfm":
        if name == "exact":
            r = est.kmeans_mfm_exact(inst.Y)
        elif name == "alt":
            r = est.kmeans_mfm_alt(inst.Y, seed=seed)
        else:
            r = None
        if r is not None:
            return float(err_perm(r.estimate, inst.latent)), r.objective
    elif model == "clustering" and name == "lloyd":
        r = est.balanced_lloyd(inst.Y, cfg.K, seed=seed)
        return float(err_part(r.estimate, inst.latent, cfg.K)), r.objective
    raise ConfigError(f"estimator {name!r} is not available for {model}; choose from {ESTIMATORS[model]}")


def run_simulate(cfg: dict, instance_out: str | None = None) -> dict:
    model = _require(cfg, "model")
    mcfg = make_config(model, _require(cfg, "params"))
    seed = int(cfg.get("seed", 0))
    inst = sample(mcfg, seed)
    if instance_out:
        with open(instance_out, "w") as fh:
            fh.write(instance_to_json(inst) + "\n")
    out = {"model": model, "params": config_params(mcfg), "seed": seed, "results": []}
    for name in cfg.get("estimators", ESTIMATORS.get(model, ())):
        t0 = time.perf_counter()
        error, objective = run_estimator(model, name, inst, seed)
        out["results"].append({"estimator": name, "error": error, "objective": objective,
                               "runtime_ms": (time.perf_counter() - t0) * 1000})
    return out


# --- sweep ---------------------------------------------------------------

def trial_seed(master: int, cell: int, trial: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(cell, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def sweep_cells(model: str, grid: dict) -> list[dict]:
    if model not in PARAM_ORDER:
        raise ConfigError(f"unknown model {model!r}")
    unknown = set(grid) - set(PARAM_ORDER[model])
    if unknown:
        raise ConfigError(f"unknown grid parameters for {model}: {sorted(unknown)}")
    names = [p for p in PARAM_ORDER[model] if p in grid]
    axes = []
    for p in names:
        v = grid[p]
        values = v if isinstance(v, list) else [v]
        if not values:
            raise ConfigError(f"grid for {p!r} is empty")
        axes.append(values)
    return [dict(zip(names, combo)) for combo in itertools.product(*axes)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _trial_rows(task) -> list[list[str]]:
    model, cell_params, trial, seed, estimators, record_runtime = task
    mcfg = make_config(model, cell_params)
    inst = sample(mcfg, seed)
    values = config_params(mcfg)
    rows = []
    for name in estimators:
        t0 = time.perf_counter()
        error, objective = run_estimator(model, name, inst, seed)
        runtime = _fmt((time.perf_counter() - t0) * 1000) if record_runtime else ""
        rows.append([model] + [_fmt(values[p]) for p in PARAM_ORDER[model]]
                    + [str(trial), str(seed), name, _fmt(float(error)), _fmt(float(objective)), runtime])
    return rows


def run_sweep(cfg: dict) -> str:
    """CSV text with one row per (cell, trial, estimator) in deterministic order."""
    model = _require(cfg, "model")
    cells = sweep_cells(model, _require(cfg, "grid"))
    trials = int(cfg.get("trials", 1))
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    master = int(cfg.get("seed", 0))
    estimators = cfg.get("estimators") or list(ESTIMATORS[model][:1])
    for name in estimators:
        if name not in ESTIMATORS[model]:
            raise ConfigError(f"estimator {name!r} is not available for {model}")
    record_runtime = bool(cfg.get("record_runtime", False))
    tasks = []
    for c, cell in enumerate(cells):
        make_config(model, cell)  # validates before any work starts
        for t in range(trials):
            tasks.append((model, cell, t, trial_seed(master, c, t), estimators, record_runtime))
    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_rows, tasks))
    else:
        chunks = [_trial_rows(t) for t in tasks]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", *PARAM_ORDER[model], *CSV_COLUMNS_TAIL])
    for rows in chunks:
        writer.writerows(rows)
    return buf.getvalue()


# --- argument parsing ----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--output", "-o", help="output path (default: stdout)")

    v = sub.add_parser("verify", help="run an inequality or equivalence suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.add_argument("--seed", type=int)
    v.add_argument("--bound-scale", help="multiply the bound under test (negative control)")
    common(v)

    m = sub.add_parser("mmse", help="low-degree MMSE lower bounds")
    m.add_argument("--empirical", action="store_true", help="also fit a polynomial by Monte Carlo")
    common(m)

    s = sub.add_parser("simulate", help="sample one instance and run estimators")
    s.add_argument("--seed", type=int)
    s.add_argument("--instance-out", help="write the sampled instance as JSON")
    common(s)

    w = sub.add_parser("sweep", help="Monte Carlo sweep over a parameter grid, written as CSV")
    w.add_argument("--seed", type=int)
    common(w)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if getattr(args, "seed", None) is not None:
            cfg["seed"] = args.seed
        if args.command == "verify":
            if args.bound_scale is not None:
                cfg["bound_scale"] = args.bound_scale
            code, report = run_verify(args.suite, cfg)
            _emit(report, args.output)
            return code
        if args.command == "mmse":
            if args.empirical:
                cfg["empirical"] = True
            _emit(run_mmse(cfg), args.output)
            return EXIT_OK
        if args.command == "simulate":
            _emit(run_simulate(cfg, args.instance_out), args.output)
            return EXIT_OK
        text = run_sweep(cfg)
        out = args.output or cfg.get("output")
        if out:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConfigError, DomainError, PreconditionError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
