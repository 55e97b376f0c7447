"""Recompute N and F_ad of finished runs from their trace CSVs.

Only the CSV files and an independent exact diagonalization are used, so a
mismatch points at the writer or the metric code, not at shared state.
"""

import argparse
import csv
import sys
from functools import reduce
from pathlib import Path

import numpy as np

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def ring_ground_energy(n, delta):
    h = np.zeros((2**n, 2**n), dtype=complex)
    for j in range(n):
        for axis, c in (("X", 1.0), ("Y", 1.0), ("Z", delta)):
            ops = [np.eye(2)] * n
            ops[j] = ops[(j + 1) % n] = PAULI[axis]
            h += c * reduce(np.kron, ops)
    return float(np.linalg.eigvalsh(h)[0])


def check_run(run_dir: Path, tol: float = 1e-6) -> list[str]:
    with open(run_dir / "summary.csv") as fh:
        summary = next(csv.DictReader(fh))
    manifest = dict(line.split("=", 1) for line in (run_dir / "manifest.txt").read_text().splitlines())
    data = np.loadtxt(run_dir / "trace.csv", delimiter=",", skiprows=1)
    t, fid, energy = data[:, 0], data[:, 2], data[:, 3]
    f_ad = float(np.sum(0.5 * (fid[1:] + fid[:-1]) * np.diff(t)) / (t[-1] - t[0]))
    e_ground = ring_ground_energy(int(manifest["n"]), float(manifest["delta"]))
    n_metric = (energy[0] - energy[-1]) / (energy[0] - e_ground)
    problems = []
    for name, value in (("f_ad", f_ad), ("n_metric", n_metric)):
        if abs(float(summary[name]) - value) > tol:
            problems.append(f"{run_dir}: {name} {summary[name]} vs recomputed {value:.12g}")
    return problems


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("roots", nargs="+", type=Path, help="output roots or run directories")
    args = ap.parse_args()
    runs = sorted({p.parent for root in args.roots for p in root.rglob("trace.csv")})
    problems = [msg for run in runs for msg in check_run(run)]
    for msg in problems:
        print(msg)
    print(f"checked {len(runs)} runs, {len(problems)} mismatches")
    sys.exit(1 if problems else 0)


if __name__ == "__main__":
    main()
