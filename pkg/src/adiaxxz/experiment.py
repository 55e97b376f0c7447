"""Strategy pipelines, table reproduction and CSV/manifest output."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .dynamics import (
    EvolutionTrace,
    IntegrationSettings,
    SpectrumTrace,
    propagate,
    retry_on_drift,
    spectrum_trace,
)
from .dynamics import stable_settings
from .metrics import RunSummary, summarize
from .model import CounterdiabaticTerm, InitialField, ProtocolSpec, XXZParams
from .variational import (
    OptimizationReport,
    OptimizerConfig,
    optimize_aux_and_alpha,
    optimize_aux_fields,
    optimize_cd_alpha,
    optimize_initial_orientations,
)

log = logging.getLogger(__name__)

STRATEGIES = ("sa", "sa+ah", "sa+cd", "oi", "oi+ah", "oi+cd", "oi+ah+cd")
TABLE_TIMES = (1.0, 3.0, 10.0)

# (N, F_ad) at T = 1, 3, 10 for the three anisotropies with published tables
REFERENCE_TABLES = {
    0.5: {
        "sa": [(0.01, 0.38), (0.06, 0.39), (0.20, 0.40)],
        "sa+ah": [(0.57, 0.39), (0.78, 0.50), (0.94, 0.87)],
        "sa+cd": [(0.56, 0.55), (0.85, 0.85), (1.00, 0.99)],
        "oi": [(0.30, 0.82), (0.88, 0.94), (0.98, 0.99)],
        "oi+ah": [(0.30, 0.82), (0.88, 0.94), (0.98, 0.99)],
        "oi+cd": [(0.84, 0.94), (0.92, 0.96), (0.99, 0.96)],
        "oi+ah+cd": [(0.84, 0.94), (0.92, 0.96), (0.99, 0.96)],
    },
    1.0: {
        "sa": [(0.00, 0.37), (0.00, 0.37), (0.00, 0.37)],
        "sa+ah": [(0.37, 0.36), (0.62, 0.43), (0.90, 0.71)],
        "sa+cd": [(0.00, 0.37), (0.00, 0.37), (0.00, 0.37)],
        "oi": [(0.34, 0.79), (0.92, 0.95), (1.00, 1.00)],
        "oi+ah": [(0.34, 0.79), (0.92, 0.95), (1.00, 1.00)],
        "oi+cd": [(0.85, 0.95), (0.95, 0.98), (1.00, 0.94)],
        "oi+ah+cd": [(0.84, 0.94), (0.95, 0.98), (1.00, 0.94)],
    },
    1.5: {
        "sa": [(0.01, 0.36), (0.04, 0.36), (0.12, 0.37)],
        "sa+ah": [(0.60, 0.39), (0.56, 0.47), (0.94, 0.82)],
        "sa+cd": [(0.58, 0.58), (0.85, 0.85), (1.00, 0.99)],
        "oi": [(0.40, 0.84), (0.91, 0.96), (0.99, 0.99)],
        "oi+ah": [(0.84, 0.94), (0.92, 0.96), (1.00, 0.99)],
        "oi+cd": [(0.84, 0.94), (0.93, 0.97), (0.99, 0.96)],
        "oi+ah+cd": [(0.84, 0.95), (0.92, 0.97), (1.00, 0.99)],
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "sa"
    delta: float = 1.0
    total_time: float = 10.0
    n: int = 8
    dt: float = 1e-3
    sample_count: int = 1001
    restarts: int = 16
    max_evals: int = 400
    max_evals_static: int = 2000
    alpha_grid: int = 21
    omega_bound: float = 4.0
    objective_dt: float = 5e-3
    seed: int = 0
    spectrum_levels: int = 16
    spectrum_grid: int = 400
    out_dir: str = "adia_out"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; valid tags: {', '.join(STRATEGIES)}")
        if not np.isfinite(self.delta):
            raise ConfigError("delta must be finite")
        if not self.total_time > 0:
            raise ConfigError("total_time must be positive")
        if not 2 <= self.n <= 12:
            raise ConfigError("n must lie in [2, 12]")
        if self.spectrum_levels < 2 or self.spectrum_grid < 3:
            raise ConfigError("need spectrum_levels >= 2 and spectrum_grid >= 3")
        try:
            self.settings()
            self.optimizer()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ExperimentConfig":
        """Build from string or typed values; unknown keys are rejected."""
        types = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(types)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        parsed = {}
        for key, raw in values.items():
            kind = {"int": int, "float": float, "str": str}[types[key]]
            try:
                parsed[key] = kind(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**parsed)

    def settings(self) -> IntegrationSettings:
        return IntegrationSettings(dt=self.dt, sample_count=self.sample_count)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            restarts=self.restarts,
            max_evals_dynamic=self.max_evals,
            max_evals_static=self.max_evals_static,
            alpha_grid=self.alpha_grid,
            omega_bound=self.omega_bound,
            objective_dt=self.objective_dt,
            seed=self.seed,
        )

    @property
    def slug(self) -> str:
        return f"{self.strategy.replace('+', '-')}_d{self.delta:g}_T{self.total_time:g}_n{self.n}"


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


@lru_cache(maxsize=16)
def _oi_field(xxz: XXZParams, cfg: OptimizerConfig) -> tuple[InitialField, OptimizationReport]:
    return optimize_initial_orientations(xxz, cfg)


def prepare_protocol(
    strategy: str, xxz: XXZParams, total_time: float, cfg: OptimizerConfig
) -> tuple[ProtocolSpec, bool, dict[str, OptimizationReport]]:
    """Run the optimizations a strategy needs; returns (spec, with_cd, reports).

    Orientations are fixed first from the static objective, then the
    auxiliary fields and/or CD strength are fitted to the final energy.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; valid tags: {', '.join(STRATEGIES)}")
    parts = set(strategy.split("+"))
    reports: dict[str, OptimizationReport] = {}
    if "oi" in parts:
        initial, reports["orientations"] = _oi_field(xxz, cfg)
    else:
        initial = InitialField.transverse(xxz.n)
    spec = ProtocolSpec(xxz, initial, total_time)
    with_cd = "cd" in parts
    if with_cd:
        alpha, reports["alpha"] = optimize_cd_alpha(spec, cfg)
        spec = spec.replace(cd=CounterdiabaticTerm(alpha))
    if "ah" in parts and with_cd:
        aux, alpha, reports["aux+alpha"] = optimize_aux_and_alpha(spec.replace(cd=None), cfg, alpha_start=alpha)
        spec = spec.replace(aux=aux, cd=CounterdiabaticTerm(alpha))
    elif "ah" in parts:
        aux, reports["aux"] = optimize_aux_fields(spec, cfg)
        spec = spec.replace(aux=aux)
    return spec, with_cd, reports


def evolve(spec: ProtocolSpec, with_cd: bool, settings: IntegrationSettings) -> EvolutionTrace:
    return retry_on_drift(lambda st: propagate(spec, with_cd, st), stable_settings(spec, with_cd, settings))


@dataclass
class RunResult:
    config: ExperimentConfig
    spec: ProtocolSpec
    with_cd: bool
    summary: RunSummary
    trace: EvolutionTrace
    reports: dict[str, OptimizationReport]
    elapsed: float


def run_experiment(config: ExperimentConfig) -> RunResult:
    start = time.perf_counter()
    spec, with_cd, reports = prepare_protocol(
        config.strategy, XXZParams(config.n, config.delta), config.total_time, config.optimizer()
    )
    trace = evolve(spec, with_cd, config.settings())
    summary = summarize(trace, spec, config.strategy)
    return RunResult(config, spec, with_cd, summary, trace, reports, time.perf_counter() - start)


# --- output -------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


SUMMARY_FIELDS = [f.name for f in fields(RunSummary)]


def write_summary(path: Path, summaries: Iterable[RunSummary]) -> Path:
    rows = ([getattr(s, k) for k in SUMMARY_FIELDS] for s in summaries)
    return write_csv(path, SUMMARY_FIELDS, rows)


def write_trace(path: Path, trace: EvolutionTrace) -> Path:
    header = ["t", "fidelity_to_target", "fidelity_to_instantaneous", "energy"]
    cols = (trace.times, trace.fidelity_to_target, trace.fidelity_to_instantaneous, trace.energy)
    return write_csv(path, header, zip(*cols))


def write_spectrum(path: Path, trace: SpectrumTrace) -> Path:
    k = trace.levels.shape[1]
    header = ["s"] + [f"E_{i}" for i in range(k)]
    return write_csv(path, header, ([s, *row] for s, row in zip(trace.s_grid, trace.levels)))


def spec_to_dict(spec: ProtocolSpec) -> dict:
    return {
        "n": spec.n,
        "delta": spec.xxz.delta,
        "J": spec.xxz.J,
        "total_time": spec.total_time,
        "epsilon": spec.initial.epsilon,
        "directions": [list(d) for d in spec.initial.directions],
        "omegas": None if spec.aux is None else list(spec.aux.omegas),
        "alpha": None if spec.cd is None else spec.cd.alpha,
        "schedule": spec.schedule.kind,
    }


def write_manifest(path: Path, config: ExperimentConfig, extra: Mapping[str, object] = ()) -> Path:
    """key=value lines; the timestamp sits alone on the last line."""
    lines = [f"library_version={__version__}"]
    lines += [f"{k}={fmt(v)}" for k, v in asdict(config).items()]
    lines += [f"{k}={fmt(v)}" for k, v in dict(extra).items()]
    lines.append(f"timestamp={datetime.now(timezone.utc).isoformat()}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def spectrum_for(spec: ProtocolSpec, grid_points: int, levels: int) -> SpectrumTrace:
    return spectrum_trace(spec, np.linspace(0.0, 1.0, grid_points), levels)


def write_run(result: RunResult, out_dir: Path | None = None) -> dict[str, Path]:
    cfg = result.config
    out = Path(out_dir or cfg.out_dir) / cfg.slug
    paths = {
        "summary": write_summary(out / "summary.csv", [result.summary]),
        "trace": write_trace(out / "trace.csv", result.trace),
        "spectrum": write_spectrum(
            out / "spectrum.csv", spectrum_for(result.spec, cfg.spectrum_grid, cfg.spectrum_levels)
        ),
    }
    optimization = {
        "protocol": spec_to_dict(result.spec),
        "with_cd": result.with_cd,
        "reports": {k: r.to_dict() for k, r in result.reports.items()},
    }
    paths["optimization"] = out / "optimization.json"
    paths["optimization"].write_text(json.dumps(optimization, indent=1, sort_keys=True) + "\n")
    paths["manifest"] = write_manifest(out / "manifest.txt", cfg, {"with_cd": result.with_cd})
    return paths


def emit_spectrum(config: ExperimentConfig, grid_points: int | None = None, levels: int | None = None) -> Path:
    spec, _, _ = prepare_protocol(
        config.strategy, XXZParams(config.n, config.delta), config.total_time, config.optimizer()
    )
    trace = spectrum_for(spec, grid_points or config.spectrum_grid, levels or config.spectrum_levels)
    out = Path(config.out_dir) / config.slug
    write_manifest(out / "spectrum_manifest.txt", config)
    return write_spectrum(out / "spectrum.csv", trace)


# --- tables -------------------------------------------------------------------------


@dataclass
class TableCell:
    strategy: str
    total_time: float
    summary: RunSummary | None
    seed: int | None
    error: str | None = None


def reference_for(delta: float) -> dict | None:
    for key, table in REFERENCE_TABLES.items():
        if abs(key - delta) < 1e-12:
            return table
    return None


def reproduce_table(
    delta: float,
    base: ExperimentConfig = ExperimentConfig(),
    seeds: Iterable[int] = (0,),
    strategies: Iterable[str] = STRATEGIES,
    times: Iterable[float] = TABLE_TIMES,
) -> list[TableCell]:
    """Run every strategy at every time; keeps the lowest final energy over seeds."""
    seeds = list(seeds)
    cells = []
    for strategy in strategies:
        for T in times:
            best, best_seed, error = None, None, None
            for seed in seeds:
                cfg = replace(base, strategy=strategy, delta=delta, total_time=T, seed=seed)
                try:
                    summary = run_experiment(cfg).summary
                except Exception as exc:  # a failed cell is reported, the table still emitted
                    log.exception("cell %s T=%g seed=%d failed", strategy, T, seed)
                    error = f"{type(exc).__name__}: {exc}"
                    continue
                if best is None or summary.final_energy < best.final_energy:
                    best, best_seed = summary, seed
                if strategy in ("sa", "oi"):
                    break  # no dynamic optimization; seeds cannot change the result
            cells.append(TableCell(strategy, T, best, best_seed, None if best else error))
            log.info("cell %s T=%g done", strategy, T)
    return cells


def table_rows(delta: float, cells: list[TableCell]) -> tuple[list[str], list[list]]:
    ref = reference_for(delta)
    header = ["strategy", "total_time", "n_metric", "f_ad", "e_initial", "final_energy", "e_ground", "seed", "status"]
    if ref:
        header += ["ref_n_metric", "ref_f_ad"]
    rows = []
    for c in cells:
        s = c.summary
        row = [c.strategy, c.total_time]
        if s is None:
            row += ["nan"] * 5 + ["", "FAILED"]
        else:
            row += [s.n_metric, s.f_ad, s.e_initial, s.final_energy, s.e_ground, c.seed, "ok"]
        if ref:
            idx = list(TABLE_TIMES).index(c.total_time) if c.total_time in TABLE_TIMES else None
            pair = ref.get(c.strategy, [None] * 3)[idx] if idx is not None else None
            row += list(pair) if pair else ["", ""]
        rows.append(row)
    return header, rows


def format_table(delta: float, cells: list[TableCell]) -> str:
    """Strategies as rows, (N, F_ad) per total time as columns, published values on the line below."""
    ref = reference_for(delta)
    times = sorted({c.total_time for c in cells})
    lookup = {(c.strategy, c.total_time): c for c in cells}
    head = f"{'delta = ' + format(delta, 'g'):<12}" + "".join(f"| T={T:<16g}" for T in times)
    sub = f"{'':<12}" + "".join(f"| {'N':>7} {'F_ad':>8} " for _ in times)
    lines = [head, sub, "-" * len(sub)]
    for strategy in dict.fromkeys(c.strategy for c in cells):
        line = f"{strategy.upper():<12}"
        refline = f"{'  reference':<12}"
        for T in times:
            c = lookup.get((strategy, T))
            if c is None or c.summary is None:
                line += f"| {'FAILED':>16} "
            else:
                line += f"| {c.summary.n_metric:7.3f} {c.summary.f_ad:8.3f} "
            if ref and T in TABLE_TIMES and strategy in ref:
                n_ref, f_ref = ref[strategy][list(TABLE_TIMES).index(T)]
                refline += f"| {n_ref:7.2f} {f_ref:8.2f} "
            else:
                refline += f"| {'':16} "
        lines.append(line)
        if ref:
            lines.append(refline)
    return "\n".join(lines)


def write_table(delta: float, cells: list[TableCell], base: ExperimentConfig, seeds) -> dict[str, Path]:
    out = Path(base.out_dir) / f"table_d{delta:g}_n{base.n}"
    header, rows = table_rows(delta, cells)
    paths = {"table_csv": write_csv(out / "table.csv", header, rows)}
    paths["table_txt"] = out / "table.txt"
    paths["table_txt"].write_text(format_table(delta, cells) + "\n")
    paths["manifest"] = write_manifest(
        out / "manifest.txt", replace(base, delta=delta), {"seeds": " ".join(str(s) for s in seeds)}
    )
    return paths
