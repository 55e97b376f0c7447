"""Reproduce the three strategy tables (delta = 0.5, 1.0, 1.5) at full budget.

Slow: the auxiliary-field cells dominate (minutes each on one core).
"""

import argparse
import logging

from adiaxxz.experiment import ExperimentConfig, format_table, reproduce_table, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.5, 1.0, 1.5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--out", default="adia_out")
    ap.add_argument("--restarts", type=int, default=16)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    base = ExperimentConfig(out_dir=args.out, restarts=args.restarts)
    for delta in args.deltas:
        cells = reproduce_table(delta, base, args.seeds)
        write_table(delta, cells, base, args.seeds)
        print(format_table(delta, cells), end="\n\n")


if __name__ == "__main__":
    main()
