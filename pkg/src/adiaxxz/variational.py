"""Derivative-free searches for initial orientations, auxiliary fields and CD strength."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import Bounds, OptimizeWarning
from scipy.optimize import minimize as scipy_minimize

from .dynamics import IntegrationSettings, NormDriftError, final_state, retry_on_drift, stable_settings
from .model import (
    AuxiliaryField,
    CounterdiabaticTerm,
    InitialField,
    ProtocolSpec,
    XXZParams,
    build_target,
)

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_evals_dynamic: int = 400
    max_evals_static: int = 2000
    simplex_scale: float = 0.5
    tol_static: float = 1e-6
    tol_dynamic: float = 1e-4
    xtol_static: float = 1e-6
    xtol_dynamic: float = 1e-3
    seed: int = 0
    omega_bound: float = 4.0
    alpha_grid: int = 21
    alpha_tol: float = 1e-3
    objective_dt: float = 5e-3

    def __post_init__(self):
        for name in ("restarts", "max_evals_dynamic", "max_evals_static", "alpha_grid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.simplex_scale > 0 or not self.objective_dt > 0:
            raise ValueError("simplex_scale and objective_dt must be positive")

    def objective_settings(self) -> IntegrationSettings:
        return IntegrationSettings(dt=self.objective_dt, sample_count=2)


@dataclass(frozen=True)
class ParameterSpace:
    """Per-entry intervals. Unbounded (periodic) entries use them only for sampling."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    bounded: tuple[bool, ...]

    @classmethod
    def box(cls, lower, upper) -> "ParameterSpace":
        lower, upper = np.broadcast_arrays(np.asarray(lower, float), np.asarray(upper, float))
        return cls(tuple(lower), tuple(upper), (True,) * len(lower))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def project(self, x: np.ndarray) -> np.ndarray:
        lo = np.where(self.bounded, self.lower, -np.inf)
        hi = np.where(self.bounded, self.upper, np.inf)
        return np.clip(x, lo, hi)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


@dataclass
class RestartRecord:
    start: list[float]
    params: list[float]
    objective: float
    evals: int
    converged: bool
    trajectory: list[tuple[int, float]] = field(default_factory=list)
    error: str | None = None


@dataclass
class OptimizationReport:
    best_params: np.ndarray
    best_objective: float
    restarts: list[RestartRecord]
    seed: int

    def to_dict(self) -> dict:
        return {
            "best_params": [float(x) for x in self.best_params],
            "best_objective": float(self.best_objective),
            "seed": self.seed,
            "restarts": [asdict(r) for r in self.restarts],
        }


class _Budget(Exception):
    pass


class _Tracker:
    """Counts evaluations, projects onto bounds and keeps the best point seen."""

    def __init__(self, objective, space: ParameterSpace, max_evals: int):
        self.objective = objective
        self.space = space
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_f = np.inf
        self.trajectory: list[tuple[int, float]] = []

    def __call__(self, x):
        if self.evals >= self.max_evals:
            raise _Budget
        x = self.space.project(np.asarray(x, dtype=float))
        f = float(self.objective(x))
        self.evals += 1
        if f < self.best_f:
            self.best_f, self.best_x = f, x.copy()
            self.trajectory.append((self.evals, f))
        return f


def _initial_simplex(x0: np.ndarray, space: ParameterSpace, scale: float) -> np.ndarray:
    sim = np.tile(x0, (len(x0) + 1, 1))
    for k in range(len(x0)):
        step = scale
        if space.bounded[k]:
            step = min(scale, 0.5 * (space.upper[k] - space.lower[k]))
            if x0[k] + step > space.upper[k]:
                step = -step
        sim[k + 1, k] += step
    return sim


def minimize(
    objective: Callable[[np.ndarray], float],
    space: ParameterSpace,
    cfg: OptimizerConfig,
    canonical_starts: Sequence[Sequence[float]] = (),
    max_evals: int | None = None,
    tol: float | None = None,
    xtol: float | None = None,
) -> OptimizationReport:
    """Multi-start bounded Nelder-Mead.

    Canonical starts come first, the remaining ``cfg.restarts`` slots are drawn
    uniformly from ``space`` with per-restart generators spawned from
    ``cfg.seed``. A restart whose objective raises is recorded and skipped.
    """
    max_evals = cfg.max_evals_dynamic if max_evals is None else max_evals
    tol = cfg.tol_dynamic if tol is None else tol
    xtol = cfg.xtol_dynamic if xtol is None else xtol
    starts = [space.project(np.asarray(s, dtype=float)) for s in canonical_starts]
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)]
    for rng in rngs[len(starts):]:
        starts.append(space.sample(rng))
    bounds = None
    if any(space.bounded):
        lo = np.where(space.bounded, space.lower, -np.inf)
        hi = np.where(space.bounded, space.upper, np.inf)
        bounds = Bounds(lo, hi)

    records = []
    for x0 in starts:
        tracker = _Tracker(objective, space, max_evals)
        converged, error = False, None
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                res = scipy_minimize(
                    tracker,
                    x0,
                    method="Nelder-Mead",
                    bounds=bounds,
                    options={
                        "initial_simplex": _initial_simplex(x0, space, cfg.simplex_scale),
                        "maxfev": max_evals,
                        "maxiter": 100 * max_evals,
                        "fatol": tol,
                        "xatol": xtol,
                    },
                )
            converged = bool(res.success)
        except _Budget:
            pass
        except (NormDriftError, FloatingPointError, np.linalg.LinAlgError) as exc:
            error = f"{type(exc).__name__}: {exc}"
            log.warning("restart aborted: %s", error)
        records.append(
            RestartRecord(
                start=[float(v) for v in x0],
                params=[] if tracker.best_x is None else [float(v) for v in tracker.best_x],
                objective=float(tracker.best_f),
                evals=tracker.evals,
                converged=converged,
                trajectory=tracker.trajectory,
                error=error,
            )
        )
    ok = [r for r in records if r.params]
    if not ok:
        raise RuntimeError("every restart failed")
    best = min(ok, key=lambda r: r.objective)
    return OptimizationReport(np.array(best.params), best.objective, records, cfg.seed)


# --- initial orientations (static objective) -----------------------------------


def product_energy_from_angles(p: XXZParams, x: np.ndarray) -> float:
    """<H_f> of the product ground state for angles x = (theta_0.., phi_0..)."""
    theta, phi = x[: p.n], x[p.n :]
    m = -np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1)
    nxt = np.roll(m, -1, axis=0)
    return float(p.J * np.sum(m[:, 0] * nxt[:, 0] + m[:, 1] * nxt[:, 1] + p.delta * m[:, 2] * nxt[:, 2]))


def orientation_starts(n: int) -> list[np.ndarray]:
    """Transverse-field start plus Neel patterns along x, y and z."""
    alt = np.arange(n) % 2
    half = np.full(n, np.pi / 2)
    return [
        np.concatenate([half, np.full(n, np.pi)]),
        np.concatenate([half, np.pi * alt]),
        np.concatenate([half, np.pi / 2 + np.pi * alt]),
        np.concatenate([np.pi * alt, np.zeros(n)]),
    ]


def optimize_initial_orientations(
    p: XXZParams, cfg: OptimizerConfig = OptimizerConfig(), epsilon: float = 1.0, canonical: bool = True
) -> tuple[InitialField, OptimizationReport]:
    space = ParameterSpace(
        lower=(0.0,) * (2 * p.n),
        upper=(np.pi,) * p.n + (2 * np.pi,) * p.n,
        bounded=(False,) * (2 * p.n),
    )
    report = minimize(
        lambda x: product_energy_from_angles(p, x),
        space,
        cfg,
        canonical_starts=orientation_starts(p.n) if canonical else (),
        max_evals=cfg.max_evals_static,
        tol=cfg.tol_static,
        xtol=cfg.xtol_static,
    )
    x = report.best_params
    field_ = InitialField.from_angles(x[: p.n], x[p.n :], epsilon)
    theta, phi = field_.angles()
    report.best_params = np.concatenate([theta, phi])
    return field_, report


# --- dynamic objectives -----------------------------------------------------------


def final_energy(spec: ProtocolSpec, with_cd: bool, settings: IntegrationSettings) -> float:
    psi = retry_on_drift(lambda st: final_state(spec, with_cd, st), stable_settings(spec, with_cd, settings))
    return float(np.real(np.vdot(psi, build_target(spec.xxz) @ psi)))


def optimize_aux_fields(
    template: ProtocolSpec,
    cfg: OptimizerConfig = OptimizerConfig(),
    settings: IntegrationSettings | None = None,
    with_cd: bool = False,
) -> tuple[AuxiliaryField, OptimizationReport]:
    """Minimize the final <H_f> over the Zeeman strengths omega_j in [-w, w]."""
    settings = settings or cfg.objective_settings()
    n = template.n
    space = ParameterSpace.box(np.full(n, -cfg.omega_bound), np.full(n, cfg.omega_bound))

    def objective(w):
        return final_energy(template.replace(aux=AuxiliaryField(tuple(w))), with_cd, settings)

    report = minimize(objective, space, cfg, canonical_starts=[np.zeros(n)])
    return AuxiliaryField(tuple(report.best_params)), report


def optimize_cd_alpha(
    template: ProtocolSpec,
    cfg: OptimizerConfig = OptimizerConfig(),
    settings: IntegrationSettings | None = None,
) -> tuple[float, OptimizationReport]:
    """Grid bracketing over [-w, w] followed by golden-section refinement."""
    settings = settings or cfg.objective_settings()
    base = template.cd or CounterdiabaticTerm()
    w = template.replace(cd=base).alpha_bound
    cache: dict[float, float] = {}
    trajectory: list[tuple[int, float]] = []

    def f(a: float) -> float:
        a = float(np.clip(a, -w, w))
        if a not in cache:
            cache[a] = final_energy(template.replace(cd=CounterdiabaticTerm(a, base.bound)), True, settings)
            best = min(cache.values())
            if not trajectory or best < trajectory[-1][1]:
                trajectory.append((len(cache), best))
        return cache[a]

    f(0.0)
    grid = np.linspace(-w, w, cfg.alpha_grid)
    vals = [f(a) for a in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    x1, x2 = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > cfg.alpha_tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    alpha, best = min(cache.items(), key=lambda kv: (kv[1], abs(kv[0])))
    record = RestartRecord(
        start=[0.0], params=[alpha], objective=best, evals=len(cache), converged=True, trajectory=trajectory
    )
    return alpha, OptimizationReport(np.array([alpha]), best, [record], cfg.seed)


def optimize_aux_and_alpha(
    template: ProtocolSpec,
    cfg: OptimizerConfig = OptimizerConfig(),
    settings: IntegrationSettings | None = None,
    alpha_start: float = 0.0,
) -> tuple[AuxiliaryField, float, OptimizationReport]:
    """Joint simplex search over (omega_1..omega_n, alpha)."""
    settings = settings or cfg.objective_settings()
    n = template.n
    base = template.cd or CounterdiabaticTerm()
    w = template.replace(cd=base).alpha_bound
    space = ParameterSpace.box(
        np.append(np.full(n, -cfg.omega_bound), -w), np.append(np.full(n, cfg.omega_bound), w)
    )

    def objective(x):
        spec = template.replace(aux=AuxiliaryField(tuple(x[:n])), cd=CounterdiabaticTerm(float(x[n]), base.bound))
        return final_energy(spec, True, settings)

    starts = [np.zeros(n + 1)]
    if alpha_start != 0.0:
        starts.append(np.append(np.zeros(n), alpha_start))
    report = minimize(objective, space, cfg, canonical_starts=starts)
    x = report.best_params
    return AuxiliaryField(tuple(x[:n])), float(x[n]), report
