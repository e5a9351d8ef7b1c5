"""Replicated out-of-sample comparison against SAA.

For every block ``(distribution, N)`` the harness draws ``K`` training
samples, lets every method solve every sample, and evaluates each decision
under the true distribution: exactly (analytic moments or ``w' S w``) by
default, or on a shared evaluation sample of size ``L`` per replication.
The per-replication differences ``cost_saa - cost_method`` are averaged
and given a normal-approximation 95% interval.

Work items are addressed by ``(block, replication)`` and every random
stream is derived from that address, so the output does not depend on the
number of worker processes.
"""

from __future__ import annotations

import json
import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from . import portfolio
from .distributions import MultivariateT
from .exceptions import ConfigError, DegenerateBandwidthError, EstimationError, SingularCovarianceError
from .methods import MethodSpec, family_of, univariate_moments
from .quadratic import DEFAULT_BOX, DecisionBox, average_decisions, expected_cost, minimize_moments, sample_moments
from .streams import stream

log = logging.getLogger(__name__)

CI_MULTIPLIER = 1.96
FAMILY_CODES = {"quadratic": 0, "portfolio": 1}
ESTIMATION_FAILURES = (EstimationError, DegenerateBandwidthError, SingularCovarianceError)


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    sample_sizes: tuple
    replications: int
    methods: tuple
    master_seed: int = 20190601
    eval_size: int = 100_000
    mc_eval: bool = False
    cost_ids: tuple = ()
    costs: dict = field(default_factory=dict)
    distribution_ids: tuple = ()
    distributions: dict = field(default_factory=dict)
    covariance_ids: tuple = ()
    covariances: dict = field(default_factory=dict)
    nu: float = 3.0
    box: DecisionBox = DEFAULT_BOX
    output_dir: str = "results"
    basename: str = ""
    workers: int | None = None

    def __post_init__(self):
        problems = []
        if self.family not in FAMILY_CODES:
            problems.append(f"family must be 'quadratic' or 'portfolio', got {self.family!r}")
        if self.replications < 2:
            problems.append(f"replications must be >= 2, got {self.replications}")
        if self.eval_size < 1:
            problems.append(f"eval_size must be >= 1, got {self.eval_size}")
        if not self.sample_sizes:
            problems.append("sample_sizes must be nonempty")
        min_n = 2 if self.family == "portfolio" else 1
        if any(int(n) < min_n for n in self.sample_sizes):
            problems.append(f"sample sizes must be >= {min_n}")
        if not self.methods:
            problems.append("at least one method is required")
        if self.family == "quadratic":
            problems += [f"unknown cost id {i}" for i in self.cost_ids if i not in self.costs]
            problems += [f"unknown distribution id {i}" for i in self.distribution_ids if i not in self.distributions]
            if not self.cost_ids or not self.distribution_ids:
                problems.append("quadratic experiments need cost_ids and distribution_ids")
        elif self.family == "portfolio":
            problems += [f"unknown covariance id {i}" for i in self.covariance_ids if i not in self.covariances]
            if not self.covariance_ids:
                problems.append("portfolio experiments need covariance_ids")
        if problems:
            raise ConfigError(problems)

    @property
    def method_names(self) -> tuple:
        return tuple(m.name for m in self.methods)

    @property
    def blocks(self) -> list:
        ids = self.distribution_ids if self.family == "quadratic" else self.covariance_ids
        return [(i, int(n)) for i in ids for n in self.sample_sizes]

    @property
    def problem_ids(self) -> tuple:
        return tuple(self.cost_ids) if self.family == "quadratic" else ("minvar",)


@dataclass(frozen=True)
class ImprovementRecord:
    family: str
    problem_id: object
    distribution_id: object
    method: str
    n: int
    k: int
    mean_improvement: float
    ci_low: float
    ci_high: float
    mean_cost_saa: float
    mean_cost_method: float
    excluded: int


def paired_improvement(costs_saa, costs_m):
    """Mean of ``costs_saa - costs_m`` with a 1.96-standard-error interval."""
    a = np.asarray(costs_saa, dtype=float)
    b = np.asarray(costs_m, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 1 or a.size < 2:
        raise ValueError("need at least two paired replications")
    diff = a - b
    mean = float(np.mean(diff))
    se = float(np.std(diff, ddof=1)) / math.sqrt(diff.size)
    return mean, mean - CI_MULTIPLIER * se, mean + CI_MULTIPLIER * se


# ---------------------------------------------------------------------------
# work items


def _rng_factory(seed, key, method: MethodSpec):
    return lambda role: stream(seed, *key, method.code, role=role)


def _quadratic_item(cfg: ExperimentConfig, block, rep):
    dist_id, n = block
    truth = cfg.distributions[dist_id]
    key = (FAMILY_CODES["quadratic"], dist_id, n, rep)
    y = truth.sample(n, stream(cfg.master_seed, *key, role="training"))
    if cfg.mc_eval:
        truth_moments = sample_moments(truth.sample(cfg.eval_size, stream(cfg.master_seed, *key, role="evaluation")))
    else:
        truth_moments = truth.moments()
    family = family_of(truth)
    costs = [cfg.costs[c] for c in cfg.cost_ids]
    out = np.full((len(cfg.methods), len(costs)), np.nan)
    counters = Counter()
    for i, method in enumerate(cfg.methods):
        try:
            m1, m2 = univariate_moments(y, method, family, _rng_factory(cfg.master_seed, key, method))
        except ESTIMATION_FAILURES as exc:
            counters[f"excluded:{method.name}"] += 1
            log.debug("replication %s/%s excluded for %s: %s", block, rep, method.name, exc)
            continue
        for j, cost in enumerate(costs):
            x = average_decisions(minimize_moments(cost, m1, m2, cfg.box))
            out[i, j] = expected_cost(cost, x, truth_moments)
    return out, counters


def _portfolio_item(cfg: ExperimentConfig, block, rep):
    cov_id, n = block
    cov = np.asarray(cfg.covariances[cov_id], dtype=float)
    truth = MultivariateT.from_covariance(np.zeros(cov.shape[0]), cov, cfg.nu)
    key = (FAMILY_CODES["portfolio"], cov_id, n, rep)
    s = truth.sample(n, stream(cfg.master_seed, *key, role="training"))
    if cfg.mc_eval:
        z = truth.sample(cfg.eval_size, stream(cfg.master_seed, *key, role="evaluation"))
        target = z.T @ z / z.shape[0]
    else:
        target = cov
    out = np.full((len(cfg.methods), 1), np.nan)
    counters = Counter()
    for i, method in enumerate(cfg.methods):
        rng_for = _rng_factory(cfg.master_seed, key, method)
        role = "bootstrap" if method.name == "bagging" else "mcmc"
        try:
            w = portfolio.method_weights(s, method, rng_for(role), counters)
        except ESTIMATION_FAILURES as exc:
            counters[f"excluded:{method.name}"] += 1
            log.debug("replication %s/%s excluded for %s: %s", block, rep, method.name, exc)
            continue
        out[i, 0] = portfolio.out_of_sample_variance(w, target)
    return out, counters


def _run_chunk(cfg: ExperimentConfig, items):
    fn = _quadratic_item if cfg.family == "quadratic" else _portfolio_item
    return [fn(cfg, block, rep) for block, rep in items]


def _default_workers() -> int:
    env = os.environ.get("SAABENCH_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# aggregation


def _record(cfg, problem_id, dist_id, method, n, saa, mine, excluded):
    ok = np.isfinite(saa) & np.isfinite(mine)
    k = int(ok.sum())
    if k >= 2:
        mean, lo, hi = paired_improvement(saa[ok], mine[ok])
        ms, mm = float(np.mean(saa[ok])), float(np.mean(mine[ok]))
    else:
        mean = lo = hi = ms = mm = float("nan")
    return ImprovementRecord(cfg.family, problem_id, dist_id, method, n, k, mean, lo, hi, ms, mm, excluded)


def _aggregate(cfg: ExperimentConfig, results: dict) -> list:
    """``results[(block)]`` is an array (K, methods, problems)."""
    names = cfg.method_names
    saa_idx = names.index("saa")
    records = []
    for (dist_id, n), arr in results.items():
        excluded = [int(np.sum(~np.isfinite(arr[:, i, 0]))) for i in range(len(names))]
        for j, pid in enumerate(cfg.problem_ids):
            for i, name in enumerate(names):
                records.append(_record(cfg, pid, dist_id, name, n, arr[:, saa_idx, j], arr[:, i, j], excluded[i]))
        if cfg.family == "quadratic" and len(cfg.problem_ids) > 1:
            mean_over = arr.mean(axis=2)
            for i, name in enumerate(names):
                records.append(_record(cfg, "all", dist_id, name, n, mean_over[:, saa_idx], mean_over[:, i], excluded[i]))
    if cfg.family == "portfolio" and len(cfg.covariance_ids) > 1:
        for n in cfg.sample_sizes:
            stack = np.stack([results[(c, int(n))][:, :, 0] for c in cfg.covariance_ids], axis=0)
            mean_over = stack.mean(axis=0)
            for i, name in enumerate(names):
                excluded = int(np.sum(~np.isfinite(mean_over[:, i])))
                records.append(_record(cfg, "minvar", "all", name, int(n), mean_over[:, saa_idx], mean_over[:, i], excluded))
    return records


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, counters: Counter | None = None) -> list:
    """Run every block of ``cfg`` and return one record per
    (problem, distribution, method, N), plus cross-problem aggregates
    (``problem_id="all"`` for quadratic, ``distribution_id="all"`` for
    portfolio)."""
    if "saa" not in cfg.method_names:
        cfg = replace(cfg, methods=(MethodSpec("saa"),) + tuple(cfg.methods))
    workers = workers or cfg.workers or _default_workers()
    items = [(block, rep) for block in cfg.blocks for rep in range(cfg.replications)]
    chunk = max(1, min(64, len(items) // (4 * workers) or 1))
    chunks = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    log.info("running %d work items in %d chunks on %d worker(s)", len(items), len(chunks), workers)
    if workers == 1:
        outputs = [_run_chunk(cfg, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(partial(_run_chunk, cfg), chunks))
    flat = [r for out in outputs for r in out]
    total = Counter()
    results = {}
    for (block, rep), (arr, cnt) in zip(items, flat):
        total.update(cnt)
        results.setdefault(block, []).append(arr)
    if counters is not None:
        counters.update(total)
    results = {block: np.stack(v) for block, v in results.items()}
    return _aggregate(cfg, results)


# ---------------------------------------------------------------------------
# output

CSV_HEADER = (
    "family,problem_id,distribution_id,method,n,k,mean_improvement,"
    "ci_low,ci_high,mean_cost_saa,mean_cost_method,excluded"
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(records) -> str:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join(_fmt(getattr(r, f.name)) for f in fields(ImprovementRecord)))
    return "\n".join(lines) + "\n"


def emit_csv(records, path) -> Path:
    path = Path(path)
    text = format_csv(records)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_plot(records, out_dir, basename: str = "results") -> list:
    """One SVG per (family, distribution id): improvement vs N for each
    method with a shaded 95% band. Uses the cross-problem aggregate rows
    when present so each plot summarises one distribution."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    matplotlib.rcParams["svg.hashsalt"] = "saabench"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = {}
    for r in records:
        groups.setdefault((r.family, r.distribution_id), []).append(r)
    paths = []
    for (family, dist_id), rows in groups.items():
        pids = list(dict.fromkeys(r.problem_id for r in rows))
        pid = "all" if "all" in pids else pids[0]
        rows = [r for r in rows if r.problem_id == pid]
        fig, ax = plt.subplots(figsize=(6, 4))
        for method in dict.fromkeys(r.method for r in rows):
            pts = sorted((r.n, r.mean_improvement, r.ci_low, r.ci_high) for r in rows if r.method == method)
            n, mean, lo, hi = (np.array(c, dtype=float) for c in zip(*pts))
            (line,) = ax.plot(n, mean, marker="o", label=method)
            ax.fill_between(n, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.axhline(0.0, color="black", linewidth=0.5)
        ax.set_xlabel("N")
        ax.set_ylabel("improvement over SAA")
        ax.set_title(f"{family}, distribution {dist_id}" + ("" if pid == "all" else f", problem {pid}"))
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{basename}_{family}_{dist_id}.svg"
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        finally:
            plt.close(fig)
        paths.append(path)
    return paths


def emit_metadata(cfg: ExperimentConfig, counters, path, config_hash: str, extra: dict | None = None) -> Path:
    from . import __version__

    meta = {
        "master_seed": cfg.master_seed,
        "config_hash": config_hash,
        "version": __version__,
        "family": cfg.family,
        "replications": cfg.replications,
        "sample_sizes": [int(n) for n in cfg.sample_sizes],
        "eval_size": cfg.eval_size,
        "mc_eval": cfg.mc_eval,
        "methods": list(cfg.method_names),
        "counters": dict(sorted(Counter(counters).items())),
        "mixture_prior_convention": cfg.methods[0].mixture_prior.wishart_convention,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        meta.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
