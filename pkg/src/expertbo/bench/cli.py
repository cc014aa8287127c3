"""Command-line benchmark harness.

    bench train              --config cfg.toml --out results/
    bench compare            --config cfg.toml --out results/
    bench ablate-hypothesis  --config cfg.toml --out results/
    bench ablate-accuracy    --config cfg.toml --out results/
    bench sweep-zeta         --config cfg.toml --out results/
    bench report             --out results/

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..errors import ConfigError, ExpertBoError
from . import runner
from .config import BenchConfig, load_config

COMMANDS = {
    "train": runner.cmd_train,
    "compare": runner.cmd_compare,
    "ablate-hypothesis": runner.cmd_ablate_hypothesis,
    "ablate-accuracy": runner.cmd_ablate_accuracy,
    "sweep-zeta": runner.cmd_sweep_zeta,
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["report"]:
        p = sub.add_parser(name)
        p.add_argument("--out", required=True, help="output directory")
        if name != "report":
            p.add_argument("--config", required=True, help="TOML or JSON config")
            p.add_argument("--seeds", type=int, default=None, help="override seed count")
            p.add_argument("--workers", type=int, default=None, help="override worker count")
            p.add_argument("--zeta", type=float, default=None, help="override exploration margin")
    return parser


def _apply_overrides(cfg: BenchConfig, args) -> BenchConfig:
    run = cfg.run
    if args.seeds is not None:
        run = replace(run, n_seeds=args.seeds)
    if args.workers is not None:
        run = replace(run, workers=args.workers)
    if args.zeta is not None:
        run = replace(run, zeta=args.zeta)
    return replace(cfg, run=run)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "report":
            runner.cmd_report(args.out)
            print(f"report written to {args.out}/report.md")
            return EXIT_OK
        cfg = _apply_overrides(load_config(args.config), args)
        result = COMMANDS[args.command](cfg, args.out)
        if args.command == "train":
            print(f"checkpoint: {result['checkpoint']}")
        else:
            for method in result.methods():
                finals = result.final_regrets(method)
                print(f"{method}: final regret {finals.mean():.6f} ± {finals.std():.6f}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExpertBoError, Exception) as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
