"""Command-line entry point: ``saabench {run,list,validate}``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__, config, harness
from .distributions import builtin_distributions
from .exceptions import ConfigError
from .methods import METHOD_NAMES
from .portfolio import builtin_covariances
from .quadratic import builtin_costs

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _methods_arg(text: str) -> list:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in METHOD_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be a comma-separated subset of {','.join(METHOD_NAMES)}")
    return names


def _workers_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid worker count {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("worker count must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saabench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True, metavar="{run,list,validate}")

    run = sub.add_parser("run", help="run an experiment and write CSV, SVG and metadata")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--workers", type=_workers_arg, help="worker processes (default: $SAABENCH_WORKERS or all cores)")
    run.add_argument("--methods", type=_methods_arg, help="comma-separated subset, e.g. saa,bagging")
    run.add_argument("--mc-predictive", action="store_true", default=None,
                     help="Monte Carlo predictive moments instead of analytic ones")
    run.add_argument("--mc-eval", action="store_true", default=None,
                     help="evaluate on a sampled test set instead of exact expectations")
    run.add_argument("--no-plot", action="store_true")

    sub.add_parser("list", help="print the built-in costs, distributions and covariances")

    val = sub.add_parser("validate", help="check config files without running them")
    val.add_argument("--config", required=True, type=Path, nargs="+")
    return parser


def _resolve_workers(flag, cfg) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("SAABENCH_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError([f"SAABENCH_WORKERS must be a positive integer, got {env!r}"]) from None
        if value < 1:
            raise ConfigError([f"SAABENCH_WORKERS must be a positive integer, got {env!r}"])
        return value
    return cfg.workers or os.cpu_count() or 1


def cmd_run(args) -> int:
    cfg = config.load_config(
        args.config, seed=args.seed, out=args.out, methods=args.methods,
        mc_predictive=args.mc_predictive, mc_eval=args.mc_eval,
    )
    workers = _resolve_workers(args.workers, cfg)
    counters = Counter()
    records = harness.run_experiment(cfg, workers=workers, counters=counters)
    out_dir = Path(cfg.output_dir)
    csv_path = harness.emit_csv(records, out_dir / f"{cfg.basename}.csv")
    harness.emit_metadata(cfg, counters, out_dir / f"{cfg.basename}.meta.json", config.config_hash(cfg),
                          extra={"workers": workers, "config_path": str(args.config)})
    print(f"wrote {csv_path}")
    if not args.no_plot:
        for p in harness.emit_plot(records, out_dir, cfg.basename):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_list(args) -> int:
    print("Cost functions c(x, y) = x^2 + alpha*x^2*y + beta*x*y^2 + gamma*x*y")
    print(f"{'id':>4} {'alpha':>7} {'beta':>7} {'gamma':>7}")
    for i, c in builtin_costs().items():
        print(f"{i:>4} {c.alpha:>7.2f} {c.beta:>7.2f} {c.gamma:>7.2f}")
    print()
    print("Distributions")
    for i, d in builtin_distributions().items():
        m = d.moments()
        print(f"{i:>4} {d!r}  mean={m.m1:.4f} var={m.variance:.4f}")
    print()
    print("Covariance matrices (weekly returns, 5 assets)")
    with np.printoptions(precision=6, suppress=False, linewidth=120):
        for i, c in builtin_covariances().items():
            vols = np.sqrt(np.diag(c))
            print(f"{i:>4} vols={np.array2string(vols, precision=4)} min eig={np.linalg.eigvalsh(c).min():.3e}")
            print(np.array2string(c, prefix="     "))
    return EXIT_OK


def cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.config:
        try:
            cfg = config.load_config(path)
        except ConfigError as exc:
            print(f"{path}: invalid", file=sys.stderr)
            for p in exc.problems:
                print(f"  - {p}", file=sys.stderr)
            status = EXIT_USAGE
            continue
        blocks = len(cfg.blocks)
        print(f"{path}: ok ({cfg.family}, {blocks} blocks x K={cfg.replications}, "
              f"methods={','.join(cfg.method_names)}, hash={config.config_hash(cfg)[:12]})")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "list": cmd_list, "validate": cmd_validate}[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("saabench").debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
