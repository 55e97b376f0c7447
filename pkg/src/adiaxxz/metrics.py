"""Figures of merit: normalized energy distance and time-averaged adiabatic fidelity."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import EvolutionTrace
from .model import ProtocolSpec, build_target, target_ground_energy

DENOMINATOR_FLOOR = 1e-12


class DegenerateBenchmarkError(ValueError):
    """The initial state already has the target ground energy; N(T) is undefined."""


def normalized_energy_distance(e_initial: float, e_final: float, e_ground: float) -> float:
    """Fraction of the gap between initial energy and E_F closed by the protocol."""
    denom = e_initial - e_ground
    if denom < DENOMINATOR_FLOOR:
        raise DegenerateBenchmarkError(
            f"initial energy {e_initial} is not above the ground energy {e_ground}"
        )
    return (e_initial - e_final) / denom


def adiabatic_fidelity(trace: EvolutionTrace) -> float:
    """(1/T) * integral of |<phi(t)|Psi(t)>| dt, trapezoid rule on the sample grid."""
    t = np.asarray(trace.times, dtype=float)
    f = np.asarray(trace.fidelity_to_instantaneous, dtype=float)
    if len(t) < 2:
        raise ValueError("adiabatic fidelity needs at least two samples")
    return float(np.trapezoid(f, t) / (t[-1] - t[0]))


def expectation(h: np.ndarray, psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, h @ psi)))


@dataclass
class RunSummary:
    strategy: str
    delta: float
    total_time: float
    n_metric: float
    f_ad: float
    e_initial: float
    final_energy: float
    e_ground: float
    final_fidelity: float

    def as_row(self) -> dict:
        return asdict(self)


def summarize(trace: EvolutionTrace, spec: ProtocolSpec, strategy: str = "") -> RunSummary:
    hf = build_target(spec.xxz)
    e_initial = expectation(hf, trace.initial_state)
    e_final = expectation(hf, trace.final_state)
    e_ground = target_ground_energy(spec.xxz)
    return RunSummary(
        strategy=strategy,
        delta=spec.xxz.delta,
        total_time=spec.total_time,
        n_metric=normalized_energy_distance(e_initial, e_final, e_ground),
        f_ad=adiabatic_fidelity(trace),
        e_initial=e_initial,
        final_energy=e_final,
        e_ground=e_ground,
        final_fidelity=float(trace.fidelity_to_target[-1]),
    )
