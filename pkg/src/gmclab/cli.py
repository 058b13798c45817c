"""Command-line experiment runner.

    gmclab run --config cfg.json [--seed N] [--replicas N] [--out DIR] [--workers N]
    gmclab list

Exit codes: 0 all pass flags true, 1 some acceptance flag failed,
2 configuration or estimator error.
"""

import argparse
import json
import sys

from .errors import ConfigInvalid, GmcLabError
from .experiments import DESCRIPTIONS, EXPERIMENTS
from .reporting import emit_report


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config: top level must be a JSON object")
    return cfg


def run_config(cfg: dict, out_dir: str):
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigInvalid(
            f"experiment: unknown name {name!r}; choices: {sorted(EXPERIMENTS)}")
    report = EXPERIMENTS[name](cfg)
    files = emit_report(report, out_dir)
    return report, files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmclab",
        description="seeded Monte Carlo laboratory for subcritical chaos measures")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_run.add_argument("--replicas", type=int, default=None,
                       help="override replica count")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker threads (results are worker-count invariant)")
    p_run.add_argument("--out", default="out", help="output directory")

    sub.add_parser("list", help="list experiment names")

    args = parser.parse_args(argv)
    if args.command == "list":
        for name in sorted(EXPERIMENTS):
            print(f"{name:15s} {DESCRIPTIONS[name]}")
        return 0

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["master_seed"] = args.seed
        if args.replicas is not None:
            cfg["n_replicas"] = args.replicas
        if args.workers is not None:
            cfg["workers"] = args.workers
        report, files = run_config(cfg, args.out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GmcLabError as exc:
        print(f"estimator error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    for m in report.metrics:
        flag = "PASS" if m.passed else "FAIL"
        print(f"[{flag}] {m.name}: estimate={m.estimate}"
              + (f" target={m.target}" if m.target is not None else ""))
    print("wrote: " + ", ".join(files))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
