"""Command-line entry point: ``adiaxxz run | table | spectrum``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .dynamics import NormDriftError
from .experiment import (
    STRATEGIES,
    ConfigError,
    ExperimentConfig,
    emit_spectrum,
    format_table,
    read_config_file,
    reproduce_table,
    run_experiment,
    write_run,
    write_table,
)
from .metrics import DegenerateBenchmarkError
from .model import DegeneracyError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

NUMERICAL_ERRORS = (
    NormDriftError,
    DegeneracyError,
    DegenerateBenchmarkError,
    FloatingPointError,
    np.linalg.LinAlgError,
    RuntimeError,
)

# flag name -> config key
OVERRIDES = {
    "strategy": "strategy",
    "delta": "delta",
    "total_time": "total_time",
    "sites": "n",
    "dt": "dt",
    "seed": "seed",
    "out": "out_dir",
    "spectrum_levels": "spectrum_levels",
    "spectrum_grid": "spectrum_grid",
    "restarts": "restarts",
    "max_evals": "max_evals",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--strategy", help=f"one of: {', '.join(STRATEGIES)}")
    common.add_argument("--delta", type=float)
    common.add_argument("--total-time", type=float)
    common.add_argument("--sites", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default: $ADIA_OUT_DIR or ./adia_out)")
    common.add_argument("--spectrum-levels", type=int)
    common.add_argument("--spectrum-grid", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--max-evals", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="adiaxxz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one strategy and write its outputs")
    table = sub.add_parser("table", parents=[common], help="all strategies at T = 1, 3, 10")
    table.add_argument("--seeds", type=int, nargs="+", default=None, help="optimizer seeds per cell")
    sub.add_parser("spectrum", parents=[common], help="write the instantaneous spectrum CSV")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, object] = {}
    if os.environ.get("ADIA_OUT_DIR"):
        values["out_dir"] = os.environ["ADIA_OUT_DIR"]
    if args.config:
        values.update(read_config_file(args.config))
    for flag, key in OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig.from_mapping(values)


def _run(args, cfg: ExperimentConfig) -> None:
    result = run_experiment(cfg)
    paths = write_run(result)
    s = result.summary
    print(
        f"{s.strategy} delta={s.delta:g} T={s.total_time:g}: "
        f"N={s.n_metric:.4f} F_ad={s.f_ad:.4f} E_final={s.final_energy:.6f} E_F={s.e_ground:.6f}"
    )
    print(f"outputs in {paths['summary'].parent}")


def _table(args, cfg: ExperimentConfig) -> None:
    seeds = args.seeds or [cfg.seed]
    cells = reproduce_table(cfg.delta, cfg, seeds)
    paths = write_table(cfg.delta, cells, cfg, seeds)
    print(format_table(cfg.delta, cells))
    print(f"outputs in {paths['table_csv'].parent}")


def _spectrum(args, cfg: ExperimentConfig) -> None:
    path = emit_spectrum(cfg)
    print(f"spectrum written to {path}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"run": _run, "table": _table, "spectrum": _spectrum}[args.command]
    try:
        handler(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
