"""TOML experiment configuration.

A config file names the experiment family and optionally overrides any
default. Everything omitted falls back to the benchmark defaults, so a file
containing only ``family = "quadratic"`` reproduces the full default study.

Schema (all keys optional except ``family``)::

    family = "quadratic"            # or "portfolio"
    master_seed = 20190601
    replications = 1000             # K
    sample_sizes = [10, 20, 50]     # N grid
    eval_size = 100000              # L, used only with mc_eval
    mc_eval = false
    mc_predictive = false
    methods = ["saa", "bagging", "kernel", "mle", "bayes"]
    workers = 0                     # 0: SAABENCH_WORKERS or all cores
    cost_ids = [1, ..., 10]         # quadratic
    distribution_ids = [1, ..., 5]  # quadratic
    covariance_ids = [1, ..., 5]    # portfolio
    nu = 3.0                        # portfolio return tails
    box = [-10.0, 10.0]             # quadratic decision bounds

    [output]            dir, basename
    [bagging]           B, M, with_replacement
    [kernel]            bandwidth_rule ("scott" | "fixed"), h
    [mle]               shape_min, sigma_floor, restarts, max_iter, beta_max_iter, tol, seed
    [bayes]             draws, burn_in, thin, target_acceptance
    [bayes.beta]        lo, hi
    [bayes.mixture]     delta, V, n, alpha_prec, m, wishart_convention
    [bayes.portfolio]   gamma_shape, gamma_rate, eta
    [costs.<id>]        alpha, beta, gamma
    [distributions.<id>] kind = "scaled_beta", alpha, beta
                         kind = "gaussian_mixture_2", mu1, mu2, sigma1, sigma2, rho
    [covariances.<id>]  matrix = [[...], ...]

``costs``, ``distributions`` and ``covariances`` entries add to (or
replace) the built-in tables.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import fields

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import bayes, estimators
from .distributions import GaussianMixture2, ScaledBeta, builtin_distributions
from .exceptions import ConfigError
from .harness import ExperimentConfig
from .methods import METHOD_NAMES, MethodSpec
from .portfolio import builtin_covariances, validate_covariance
from .quadratic import DecisionBox, QuadraticCost, builtin_costs

FAMILY_DEFAULTS = {
    "quadratic": {"replications": 1000, "sample_sizes": [10, 20, 50]},
    "portfolio": {"replications": 500, "sample_sizes": [30, 50, 100, 150, 200]},
}

_INT = (int,)
_NUM = (int, float)


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _list_of(kind, pred=None):
    def check(v):
        return isinstance(v, list) and len(v) > 0 and all(
            isinstance(x, kind) and not isinstance(x, bool) and (pred is None or pred(x)) for x in v
        )

    return check


# key -> (allowed types or None for custom, predicate, requirement text)
TOP_LEVEL = {
    "family": ((str,), lambda v: v in FAMILY_DEFAULTS, "'quadratic' or 'portfolio'"),
    "master_seed": (_INT, _nonneg, "a non-negative integer"),
    "replications": (_INT, lambda v: v >= 2, "an integer >= 2"),
    "sample_sizes": (None, _list_of(int, lambda x: x >= 1), "a nonempty list of positive integers"),
    "eval_size": (_INT, lambda v: v >= 1, "an integer >= 1"),
    "mc_eval": ((bool,), None, "a boolean"),
    "mc_predictive": ((bool,), None, "a boolean"),
    "methods": (None, _list_of(str, lambda x: x in METHOD_NAMES), f"a nonempty list drawn from {list(METHOD_NAMES)}"),
    "workers": (_INT, _nonneg, "a non-negative integer"),
    "cost_ids": (None, _list_of(int), "a nonempty list of integers"),
    "distribution_ids": (None, _list_of(int), "a nonempty list of integers"),
    "covariance_ids": (None, _list_of(int), "a nonempty list of integers"),
    "nu": (_NUM, lambda v: v > 2, "a number > 2"),
    "box": (None, lambda v: _list_of((int, float))(v) and len(v) == 2 and v[0] < v[1], "[lo, hi] with lo < hi"),
}

TABLES = {
    "output": {
        "dir": ((str,), None, "a string"),
        "basename": ((str,), None, "a string"),
    },
    "bagging": {
        "B": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "M": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "with_replacement": ((bool,), None, "a boolean"),
    },
    "kernel": {
        "bandwidth_rule": ((str,), lambda v: v in ("scott", "fixed"), "'scott' or 'fixed'"),
        "h": (_NUM, _nonneg, "a non-negative number"),
    },
    "mle": {
        "shape_min": (_NUM, _positive, "a positive number"),
        "sigma_floor": (_NUM, _positive, "a positive number"),
        "restarts": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "max_iter": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "beta_max_iter": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "tol": (_NUM, _positive, "a positive number"),
        "seed": (_INT, _nonneg, "a non-negative integer"),
    },
    "bayes": {
        "draws": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "burn_in": (_INT, _nonneg, "a non-negative integer"),
        "thin": (_INT, lambda v: v >= 1, "an integer >= 1"),
        "target_acceptance": (_NUM, lambda v: 0 < v < 1, "a number in (0, 1)"),
    },
    "bayes.beta": {
        "lo": (_NUM, lambda v: v >= 1, "a number >= 1"),
        "hi": (_NUM, lambda v: v > 1, "a number > 1"),
    },
    "bayes.mixture": {
        "delta": (_NUM, _positive, "a positive number"),
        "V": (_NUM, _positive, "a positive number"),
        "n": (_NUM, _positive, "a positive number"),
        "alpha_prec": (_NUM, _positive, "a positive number"),
        "m": (_NUM, None, "a number"),
        "wishart_convention": ((str,), lambda v: v in ("covariance", "precision"), "'covariance' or 'precision'"),
    },
    "bayes.portfolio": {
        "gamma_shape": (_NUM, _positive, "a positive number"),
        "gamma_rate": (_NUM, _positive, "a positive number"),
        "eta": (_NUM, _positive, "a positive number"),
    },
}

COST_KEYS = ("alpha", "beta", "gamma")
DIST_KEYS = {
    "scaled_beta": ("alpha", "beta"),
    "gaussian_mixture_2": ("mu1", "mu2", "sigma1", "sigma2", "rho"),
}


def _check(key, value, spec, problems):
    types, pred, need = spec
    if isinstance(value, bool) and types is not None and bool not in types:
        problems.append(f"{key} must be {need}, got {value!r}")
        return
    if types is not None and not isinstance(value, types):
        problems.append(f"{key} must be {need}, got {value!r}")
        return
    if isinstance(value, float) and not math.isfinite(value):
        problems.append(f"{key} must be finite, got {value!r}")
        return
    if pred is not None and not pred(value):
        problems.append(f"{key} must be {need}, got {value!r}")


def _finite_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate_dict(data: dict) -> list:
    """Every problem in ``data``, each naming the offending key."""
    problems = []
    if "family" not in data:
        problems.append("family is required ('quadratic' or 'portfolio')")
    table_roots = {"output", "bagging", "kernel", "mle", "bayes", "costs", "distributions", "covariances"}
    for key, value in data.items():
        if key in TOP_LEVEL:
            _check(key, value, TOP_LEVEL[key], problems)
        elif key not in table_roots:
            problems.append(f"unknown key {key!r}")
        elif not isinstance(value, dict):
            problems.append(f"{key} must be a table")
    for table, spec in TABLES.items():
        head, _, sub = table.partition(".")
        section = data.get(head, {})
        if sub:
            section = section.get(sub, {}) if isinstance(section, dict) else {}
        if not isinstance(section, dict):
            problems.append(f"{table} must be a table")
            continue
        for key, value in section.items():
            full = f"{table}.{key}"
            if key in spec:
                _check(full, value, spec[key], problems)
            elif not (table == "bayes" and key in ("beta", "mixture", "portfolio")):
                problems.append(f"unknown key {full!r}")
    kernel = data.get("kernel", {})
    if isinstance(kernel, dict) and kernel.get("bandwidth_rule") == "fixed" and "h" not in kernel:
        problems.append("kernel.h is required when kernel.bandwidth_rule = 'fixed'")
    beta = data.get("bayes", {}).get("beta", {}) if isinstance(data.get("bayes"), dict) else {}
    if isinstance(beta, dict) and _finite_number(beta.get("lo", 1.0)) and _finite_number(beta.get("hi", 7.0)):
        if not beta.get("lo", 1.0) < beta.get("hi", 7.0):
            problems.append("bayes.beta.lo must be below bayes.beta.hi")
    problems += _validate_catalogues(data)
    return problems


def _validate_catalogues(data) -> list:
    problems = []
    for cid, entry in (data.get("costs") or {}).items():
        key = f"costs.{cid}"
        if not cid.isdigit() or not isinstance(entry, dict):
            problems.append(f"{key} must be a table keyed by an integer id")
            continue
        for k in COST_KEYS:
            if not _finite_number(entry.get(k)):
                problems.append(f"{key}.{k} must be a finite number")
        problems += [f"unknown key '{key}.{k}'" for k in entry if k not in COST_KEYS]
    for did, entry in (data.get("distributions") or {}).items():
        key = f"distributions.{did}"
        if not did.isdigit() or not isinstance(entry, dict):
            problems.append(f"{key} must be a table keyed by an integer id")
            continue
        kind = entry.get("kind")
        before = len(problems)
        if kind not in DIST_KEYS:
            problems.append(f"{key}.kind must be one of {list(DIST_KEYS)}")
            continue
        for k in DIST_KEYS[kind]:
            if not _finite_number(entry.get(k)):
                problems.append(f"{key}.{k} must be a finite number")
        problems += [f"unknown key '{key}.{k}'" for k in entry if k not in DIST_KEYS[kind] + ("kind",)]
        if len(problems) == before:
            try:
                _make_distribution(entry)
            except ValueError as exc:
                problems.append(f"{key}: {exc}")
    for vid, entry in (data.get("covariances") or {}).items():
        key = f"covariances.{vid}"
        if not vid.isdigit() or not isinstance(entry, dict) or "matrix" not in entry:
            problems.append(f"{key} must be a table with a 'matrix' entry")
            continue
        try:
            validate_covariance(np.array(entry["matrix"], dtype=float), f"{key}.matrix")
        except (ValueError, TypeError) as exc:
            problems.append(str(exc))
    return problems


def _make_distribution(entry: dict):
    kind = entry["kind"]
    args = {k: float(entry[k]) for k in DIST_KEYS[kind]}
    return ScaledBeta(**args) if kind == "scaled_beta" else GaussianMixture2(**args)


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _sub(data, *path) -> dict:
    for p in path:
        data = data.get(p, {})
    return data


def _build_methods(data: dict, nu: float, n_assets: int) -> tuple:
    bag = _sub(data, "bagging")
    ker = _sub(data, "kernel")
    mle = _sub(data, "mle")
    chain = _sub(data, "bayes")
    shared = dict(
        bagging=estimators.BaggingSpec(**bag),
        kernel=estimators.KernelSpec(**ker),
        mle=estimators.MleFamily(**mle),
        beta_prior=bayes.BetaPrior(**_sub(data, "bayes", "beta")),
        mixture_prior=bayes.MixturePrior(**_sub(data, "bayes", "mixture")),
        portfolio_prior=bayes.PortfolioPrior(**_sub(data, "bayes", "portfolio"), n_assets=n_assets, nu=nu),
        chain=bayes.ChainSettings(**{k: v for k, v in chain.items() if not isinstance(v, dict)}),
        t_nu=float(nu),
        mc_predictive=bool(data.get("mc_predictive", False)),
    )
    names = list(data.get("methods", METHOD_NAMES))
    if "saa" not in names:
        names.insert(0, "saa")
    return tuple(MethodSpec(name, **shared) for name in dict.fromkeys(names))


def build_config(data: dict) -> ExperimentConfig:
    """Validate a raw (TOML-shaped) dict and fill in every default."""
    problems = validate_dict(data)
    if problems:
        raise ConfigError(problems)
    family = data["family"]
    data = _merge(FAMILY_DEFAULTS[family], data)

    costs = builtin_costs()
    costs.update({int(k): QuadraticCost(*(float(v[c]) for c in COST_KEYS)) for k, v in _sub(data, "costs").items()})
    dists = builtin_distributions()
    dists.update({int(k): _make_distribution(v) for k, v in _sub(data, "distributions").items()})
    covs = {k: tuple(map(tuple, v)) for k, v in builtin_covariances().items()}
    covs.update({int(k): tuple(tuple(float(x) for x in row) for row in v["matrix"])
                 for k, v in _sub(data, "covariances").items()})

    cov_ids = tuple(data.get("covariance_ids", sorted(covs)))
    dims = {len(covs[i]) for i in cov_ids if i in covs}
    n_assets = dims.pop() if len(dims) == 1 else 5
    nu = float(data.get("nu", 3.0))
    try:
        methods = _build_methods(data, nu, n_assets)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    box = data.get("box", [-10.0, 10.0])
    out = _sub(data, "output")
    return ExperimentConfig(
        family=family,
        sample_sizes=tuple(int(n) for n in data["sample_sizes"]),
        replications=int(data["replications"]),
        methods=methods,
        master_seed=int(data.get("master_seed", 20190601)),
        eval_size=int(data.get("eval_size", 100_000)),
        mc_eval=bool(data.get("mc_eval", False)),
        cost_ids=tuple(data.get("cost_ids", sorted(costs))) if family == "quadratic" else (),
        costs=costs,
        distribution_ids=tuple(data.get("distribution_ids", sorted(dists))) if family == "quadratic" else (),
        distributions=dists,
        covariance_ids=cov_ids if family == "portfolio" else (),
        covariances=covs,
        nu=nu,
        box=DecisionBox(float(box[0]), float(box[1])),
        output_dir=out.get("dir", "results"),
        basename=out.get("basename", family),
        workers=int(data["workers"]) or None if "workers" in data else None,
    )


def default_config(family: str) -> ExperimentConfig:
    return build_config({"family": family})


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: TOML parse error: {exc}"]) from exc
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror or exc}"]) from exc


def apply_overrides(data: dict, *, seed=None, out=None, workers=None, methods=None,
                    mc_predictive=None, mc_eval=None) -> dict:
    data = dict(data)
    if seed is not None:
        data["master_seed"] = seed
    if out is not None:
        data["output"] = {**data.get("output", {}), "dir": str(out)}
    if workers is not None:
        data["workers"] = workers
    if methods is not None:
        data["methods"] = list(methods)
    if mc_predictive is not None:
        data["mc_predictive"] = mc_predictive
    if mc_eval is not None:
        data["mc_eval"] = mc_eval
    return data


def load_config(path, **overrides) -> ExperimentConfig:
    return build_config(apply_overrides(read_toml(path), **overrides))


# ---------------------------------------------------------------------------
# serialisation, for hashing and the metadata sidecar


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float):
        return repr(obj)
    return obj


def config_fingerprint(cfg: ExperimentConfig) -> dict:
    """Everything that can change the numeric output (not paths or worker
    count), in a JSON-ready form."""
    used = {
        "quadratic": ("costs", "distributions"),
        "portfolio": ("covariances",),
    }[cfg.family]
    skip = {"output_dir", "basename", "workers", "costs", "distributions", "covariances"}
    out = {f.name: _plain(getattr(cfg, f.name)) for f in fields(cfg) if f.name not in skip}
    for name in used:
        ids = cfg.cost_ids if name == "costs" else cfg.distribution_ids if name == "distributions" else cfg.covariance_ids
        table = getattr(cfg, name)
        out[name] = {str(i): _plain(table[i]) for i in ids}
        if name == "distributions":
            for i in ids:
                out[name][str(i)]["kind"] = type(table[i]).__name__
    return out


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_fingerprint(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()

