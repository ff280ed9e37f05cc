"""Command-line benchmark harness.

Subcommands mirror the experiment kinds::

    dpsearch dist-check --trials 100000 --seed 1 --out report.jsonl
    dpsearch attack --config configs/acceptance/attack.conf --check
    dpsearch synth --config my_synth.conf

``--check`` exits nonzero when any threshold check fails.  The default
output directory comes from ``DPSEARCH_OUT`` (falling back to the working
directory).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import KINDS, ConfigError, ExperimentConfig, load_config
from .experiments import run
from .reports import export_csv, write_report

_OUT_ENV = "DPSEARCH_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsearch",
        description="Benchmarks for adversarially robust search structures.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="override: single seed")
        p.add_argument("--out", type=Path, default=None, help="report output path")
        p.add_argument("--check", action="store_true", help="exit nonzero on threshold failure")
        p.add_argument("--trials", type=int, default=None, help="override trial count")
        p.add_argument("--csv", type=Path, default=None, help="also export run records as CSV")
    return parser


def _resolve_out(cfg: ExperimentConfig, cli_out: Path | None) -> Path:
    if cli_out is not None:
        path = Path(cli_out)
    elif cfg.out:
        path = Path(cfg.out)
    else:
        path = Path(os.environ.get(_OUT_ENV, ".")) / f"{cfg.kind}.jsonl"
    if path.is_dir() or (cfg.kind == "synth" and not path.suffix):
        path = path / f"{cfg.kind}.jsonl"
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            if cfg.kind != args.kind:
                raise ConfigError(
                    f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}"
                )
        else:
            cfg = ExperimentConfig(kind=args.kind)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.trials is not None:
        cfg.trials = args.trials

    report = run(cfg)
    out_path = _resolve_out(cfg, args.out)
    write_report(report, out_path)
    if args.csv is not None:
        export_csv(report, args.csv)
    for check in report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        detail = {k: v for k, v in check.items() if k not in ("check", "passed")}
        print(f"[{status}] {check['check']} {detail}")
    print(f"report written to {out_path}")
    if (args.check or cfg.check) and not report.all_passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
