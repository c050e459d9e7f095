"""Command line entry point.

::

    shocklab run --config configs/reference.yaml --out results/
    shocklab sweep --config configs/sweep_eps.yaml --out results/ --t-end 4

Each command writes ``<run-id>.<table>.csv``, ``<run-id>.summary.txt`` (flat
``key = value``) and ``<run-id>.config.yaml`` (the effective configuration).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config, override
from .errors import ConfigError, ShockLabError
from .experiment import run_experiment, run_sweep, sweep_table, write_artifacts

log = logging.getLogger("shocklab")

COMMANDS = {
    "profile": "tabulate the viscous shock profile",
    "periodic": "evolve the two periodic donors only",
    "shifts": "donors, pressure integrals, initial shifts and the shift ODE",
    "run": "full experiment including the full-line solve and diagnostics",
    "sweep": "run the configured sweep, one experiment per value",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shocklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path, help="YAML configuration file")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--t-end", type=float, default=None, help="override numerics.t_end")
        p.add_argument("--resolution-scale", type=float, default=None,
                       help="multiply numerics.cells_per_period")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=None, help="parallel runs (default sweep.jobs)")
            p.add_argument("--until", choices=("periodic", "shifts", "run"), default="run",
                           help="last stage of each run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = override(load_config(args.config), t_end=args.t_end,
                       resolution_scale=args.resolution_scale, seed=args.seed)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        if not cfg.sweep.values:
            print("config error: sweep.values is empty", file=sys.stderr)
            return 2
        results = run_sweep(cfg, until=args.until, jobs=args.jobs)
        failed = 0
        for art in results:
            write_artifacts(art, args.out)
            if art.summary.status != "ok":
                failed += 1
                log.warning("%s failed in stage %s: %s", art.summary.run_id,
                            art.summary.failed_stage, art.summary.error)
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{cfg.run_id}.sweep.csv").write_text(sweep_table(cfg, results))
        print(f"{len(results) - failed}/{len(results)} runs completed; outputs in {args.out}")
        return 0 if failed == 0 else 1

    try:
        art = run_experiment(cfg, until=args.command)
    except ShockLabError as exc:
        print(f"error in stage {getattr(exc, 'stage', 'unknown')}: {exc}", file=sys.stderr)
        return 1
    write_artifacts(art, args.out)
    sys.stdout.write(art.summary.text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
