"""Time-dependent Schrodinger integration and instantaneous-spectrum tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, TypeVar

import numba
import numpy as np
import scipy.linalg

from .model import (
    ProtocolSpec,
    assemble,
    build_aux,
    build_initial,
    build_target,
    cd_exact,
    hamiltonian_terms,
    product_ground_state,
    term_coefficients,
)
from .pauli import check_operator

NORM_TOL = 1e-6
DEGENERACY_TOL = 1e-9
STABLE_PRODUCT = 0.05
MAX_GRID_STEP = 0.1  # operator-norm change allowed between ground-path grid points
_LOW_LEVELS = 8


T_ = TypeVar("T_")


class NormDriftError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegrationSettings:
    dt: float = 1e-3
    sample_count: int = 1001

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.sample_count < 2:
            raise ValueError("need at least two samples")

    def steps_for(self, total_time: float) -> int:
        """Step count: a multiple of ``sample_count - 1`` with effective dt <= dt."""
        if total_time / self.dt < 100:
            raise ValueError(f"T/dt = {total_time / self.dt:.1f} < 100; reduce dt")
        per = math.ceil(total_time / self.dt / (self.sample_count - 1) - 1e-9)
        return max(per, 1) * (self.sample_count - 1)


@dataclass
class EvolutionTrace:
    times: np.ndarray
    fidelity_to_target: np.ndarray
    fidelity_to_instantaneous: np.ndarray
    energy: np.ndarray
    final_state: np.ndarray
    initial_state: np.ndarray
    norm_drift: float

    @property
    def total_time(self) -> float:
        return float(self.times[-1])


@dataclass
class SpectrumTrace:
    s_grid: np.ndarray
    levels: np.ndarray  # (len(s_grid), k), ascending per row


@dataclass
class GroundPath:
    s_grid: np.ndarray
    states: np.ndarray  # (len(s_grid), dim)
    energies: np.ndarray
    is_lowest: np.ndarray  # ground-tracking flag per grid point
    overlaps: np.ndarray  # |<v_k|v_{k+1}>| between consecutive selections


# --- fixed-step RK4 -----------------------------------------------------------


@numba.njit(cache=True)
def _apply(indptr, indices, data, coeffs, psi, out):
    dim = psi.shape[0]
    for i in range(dim):
        out[i] = 0.0
    for k in range(indptr.shape[0]):
        c = coeffs[k]
        if c == 0.0:
            continue
        for i in range(dim):
            acc = 0.0j
            for p in range(indptr[k, i], indptr[k, i + 1]):
                acc += data[p] * psi[indices[p]]
            out[i] += c * acc


@numba.njit(cache=True)
def _rk4_kernel(indptr, indices, data, coeffs, psi0, dt, sample_every, n_samples):
    """coeffs[step, j, k]: term k at t, t + dt/2, t + dt for j = 0, 1, 2."""
    dim = psi0.shape[0]
    samples = np.empty((n_samples, dim), dtype=np.complex128)
    psi = psi0.copy()
    samples[0] = psi
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    tmp = np.empty(dim, dtype=np.complex128)
    mi = -1j
    for step in range(coeffs.shape[0]):
        _apply(indptr, indices, data, coeffs[step, 0], psi, k1)
        for i in range(dim):
            k1[i] *= mi
            tmp[i] = psi[i] + 0.5 * dt * k1[i]
        _apply(indptr, indices, data, coeffs[step, 1], tmp, k2)
        for i in range(dim):
            k2[i] *= mi
            tmp[i] = psi[i] + 0.5 * dt * k2[i]
        _apply(indptr, indices, data, coeffs[step, 1], tmp, k3)
        for i in range(dim):
            k3[i] *= mi
            tmp[i] = psi[i] + dt * k3[i]
        _apply(indptr, indices, data, coeffs[step, 2], tmp, k4)
        for i in range(dim):
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + mi * k4[i])
        if (step + 1) % sample_every == 0:
            samples[(step + 1) // sample_every] = psi
    return samples


def _pack(terms: list[np.ndarray]):
    """Row-compressed copies of the dense terms sharing one index/data buffer."""
    dim = terms[0].shape[0]
    indptr = np.zeros((len(terms), dim + 1), dtype=np.int64)
    indices, data = [], []
    offset = 0
    for k, m in enumerate(terms):
        rows, cols = np.nonzero(m)
        counts = np.bincount(rows, minlength=dim)
        indptr[k] = offset + np.concatenate([[0], np.cumsum(counts)])
        indices.append(cols)
        data.append(m[rows, cols])
        offset += len(cols)
    return indptr, np.concatenate(indices).astype(np.int64), np.concatenate(data).astype(complex)


def _check_norms(samples: np.ndarray) -> float:
    drift = float(np.max(np.abs(np.linalg.norm(samples, axis=1) - 1.0)))
    if not drift <= NORM_TOL:
        raise NormDriftError(f"state norm drifted by {drift:.3e} (> {NORM_TOL}); reduce dt")
    return drift


def evolve_samples(
    spec: ProtocolSpec,
    with_cd: bool = False,
    settings: IntegrationSettings = IntegrationSettings(),
    psi0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate i d|phi>/dt = H(t)|phi> and return (sample times, sampled states)."""
    T = spec.total_time
    steps = settings.steps_for(T)
    dt = T / steps
    t = np.arange(steps) * dt
    grid = np.stack([t, t + 0.5 * dt, np.minimum(t + dt, T)], axis=1)
    coeffs = term_coefficients(spec, grid, with_cd)
    indptr, indices, data = _pack(hamiltonian_terms(spec, with_cd))
    if psi0 is None:
        psi0 = product_ground_state(spec.initial)
    sample_every = steps // (settings.sample_count - 1)
    samples = _rk4_kernel(
        indptr, indices, data, coeffs, np.asarray(psi0, dtype=complex), dt, sample_every, settings.sample_count
    )
    times = np.linspace(0.0, T, settings.sample_count)
    _check_norms(samples)
    return times, samples


def stable_settings(
    spec: ProtocolSpec, with_cd: bool, base: IntegrationSettings = IntegrationSettings()
) -> IntegrationSettings:
    """Shrink ``base.dt`` so that dt * ||H(t)||_2 stays below ``STABLE_PRODUCT``.

    ||H(t)||_2 is bounded by sum_k |c_k(t)| ||M_k||_2 over the fixed terms.
    """
    norms = np.array([np.max(np.abs(np.linalg.eigvalsh(m))) for m in hamiltonian_terms(spec, with_cd)])
    t = np.linspace(0.0, spec.total_time, 401)
    bound = float(np.max(np.abs(term_coefficients(spec, t, with_cd)) @ norms))
    if bound * base.dt <= STABLE_PRODUCT:
        return base
    return replace(base, dt=STABLE_PRODUCT / bound)


def retry_on_drift(run: Callable[[IntegrationSettings], T_], settings: IntegrationSettings, attempts: int = 3) -> T_:
    """Call ``run(settings)``, halving dt after each norm-drift failure."""
    for _ in range(attempts):
        try:
            return run(settings)
        except NormDriftError:
            settings = replace(settings, dt=0.5 * settings.dt)
    return run(settings)


def final_state(spec, with_cd=False, settings=IntegrationSettings()) -> np.ndarray:
    return evolve_samples(spec, with_cd, settings)[1][-1]


def rk4_dense(
    hamiltonian: Callable[[float], np.ndarray],
    psi0: np.ndarray,
    total_time: float,
    settings: IntegrationSettings = IntegrationSettings(),
) -> tuple[np.ndarray, np.ndarray]:
    """Same RK4 scheme for an arbitrary dense H(t); used for the exact-CD path."""
    steps = settings.steps_for(total_time)
    dt = total_time / steps
    every = steps // (settings.sample_count - 1)
    psi = np.array(psi0, dtype=complex)
    samples = [psi.copy()]
    for n in range(steps):
        t = n * dt
        h0, hm, h1 = hamiltonian(t), hamiltonian(t + 0.5 * dt), hamiltonian(min(t + dt, total_time))
        k1 = -1j * (h0 @ psi)
        k2 = -1j * (hm @ (psi + 0.5 * dt * k1))
        k3 = -1j * (hm @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h1 @ (psi + dt * k3))
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (n + 1) % every == 0:
            samples.append(psi.copy())
    samples = np.array(samples)
    _check_norms(samples)
    return np.linspace(0.0, total_time, settings.sample_count), samples


# --- spectra along the interpolation -----------------------------------------


def _low_eigh(h: np.ndarray, k: int):
    k = min(k, h.shape[0])
    return scipy.linalg.eigh(h, subset_by_index=[0, k - 1], driver="evr")


def ground_projector_basis(h: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Orthonormal basis of the lowest eigenspace (columns)."""
    vals, vecs = _low_eigh(h, _LOW_LEVELS)
    m = int(np.sum(vals - vals[0] <= tol))
    if m == len(vals) and m < h.shape[0]:
        vals, vecs = np.linalg.eigh(h)
        m = int(np.sum(vals - vals[0] <= tol))
    return vecs[:, :m]


def ground_overlap(states: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """|<phi|Psi_0>|, with the ground eigenspace projection used when degenerate."""
    amp = np.atleast_2d(states).conj() @ basis
    return np.sqrt(np.sum(np.abs(amp) ** 2, axis=1))


def _cd_free_key(spec: ProtocolSpec) -> ProtocolSpec:
    return spec.replace(total_time=1.0, cd=None)


@lru_cache(maxsize=64)
def _ground_bases(key: ProtocolSpec, sample_count: int) -> tuple[np.ndarray, ...]:
    return tuple(ground_projector_basis(assemble(key, s)) for s in np.linspace(0.0, 1.0, sample_count))


def instantaneous_ground_overlaps(spec: ProtocolSpec, states: np.ndarray) -> np.ndarray:
    """|<phi(t_k)|Psi(t_k)>| on a uniform grid of len(states) points over [0, T]."""
    bases = _ground_bases(_cd_free_key(spec), len(states))
    return np.array([ground_overlap(psi, b)[0] for psi, b in zip(states, bases)])


def propagate(
    spec: ProtocolSpec,
    with_cd: bool = False,
    settings: IntegrationSettings = IntegrationSettings(),
    exact_cd: bool = False,
) -> EvolutionTrace:
    """Evolve the product ground state of ``spec.initial`` and record fidelities.

    ``with_cd`` adds the first-order CD term (requires ``spec.cd``);
    ``exact_cd`` instead adds the exact spectral CD operator. The instantaneous
    reference state is always the ground state of the CD-free Hamiltonian.
    """
    psi0 = product_ground_state(spec.initial)
    if exact_cd:
        times, samples = rk4_dense(
            lambda t: assemble(spec, t) + cd_exact(spec, t), psi0, spec.total_time, settings
        )
    else:
        times, samples = evolve_samples(spec, with_cd, settings, psi0)
    hf = build_target(spec.xxz)
    target = ground_projector_basis(hf)
    energy = np.real(np.einsum("ti,ij,tj->t", samples.conj(), hf, samples))
    return EvolutionTrace(
        times=times,
        fidelity_to_target=ground_overlap(samples, target),
        fidelity_to_instantaneous=instantaneous_ground_overlaps(spec, samples),
        energy=energy,
        final_state=samples[-1],
        initial_state=psi0,
        norm_drift=float(np.max(np.abs(np.linalg.norm(samples, axis=1) - 1.0))),
    )


def _grid_step_bound(spec: ProtocolSpec, s_grid: np.ndarray) -> float:
    """Upper bound on ||H(s_{k+1}) - H(s_k)||_2 over the grid."""
    lam = spec.schedule.value(s_grid)
    hi, hf = build_initial(spec.initial), build_target(spec.xxz)
    bound = np.abs(np.diff(lam)) * np.linalg.norm(hf - hi, 2)
    if spec.aux is not None:
        mu = lam * (1 - lam)
        bound = bound + np.abs(np.diff(mu)) * np.max(np.abs(np.diag(build_aux(spec.aux))))
    return float(np.max(bound)) if len(bound) else 0.0


def instantaneous_ground_path(spec: ProtocolSpec, s_grid) -> GroundPath:
    """Follow the ground state by maximum overlap with the previous selection."""
    s_grid = np.asarray(s_grid, dtype=float)
    step = _grid_step_bound(spec, s_grid)
    if step >= MAX_GRID_STEP:
        raise ValueError(f"grid too coarse: Hamiltonian changes by up to {step:.3f} J between points")
    states, energies, lowest, overlaps = [], [], [], []
    prev = None
    for s in s_grid:
        vals, vecs = np.linalg.eigh(assemble(spec, s * spec.total_time))
        if prev is None:
            if vals[1] - vals[0] <= DEGENERACY_TOL:
                raise ValueError(f"lowest level is degenerate at s={s}; the starting state is ambiguous")
            idx = 0
        else:
            ov = np.abs(vecs.conj().T @ prev)
            idx = int(np.argmax(ov))
            overlaps.append(float(ov[idx]))
        v = vecs[:, idx]
        prev = v
        states.append(v)
        energies.append(vals[idx])
        lowest.append(bool(vals[idx] - vals[0] <= DEGENERACY_TOL))
    return GroundPath(s_grid, np.array(states), np.array(energies), np.array(lowest), np.array(overlaps))


def spectrum_trace(spec: ProtocolSpec, s_grid=None, k: int | None = 16) -> SpectrumTrace:
    """Lowest ``k`` eigenvalues of the CD-free Hamiltonian along s (all if k is None)."""
    s_grid = np.linspace(0.0, 1.0, 400) if s_grid is None else np.asarray(s_grid, dtype=float)
    levels = []
    for s in s_grid:
        h = check_operator(assemble(spec, s * spec.total_time))
        if k is None or k >= h.shape[0]:
            levels.append(np.linalg.eigvalsh(h))
        else:
            levels.append(scipy.linalg.eigvalsh(h, subset_by_index=[0, k - 1], driver="evr"))
    return SpectrumTrace(s_grid, np.array(levels))


def min_gap(trace: SpectrumTrace, i: int = 0, j: int = 1, interior: bool = True) -> tuple[float, float]:
    """Grid minimum of E_j - E_i refined by one three-point parabola."""
    if not 0 <= i < j < trace.levels.shape[1]:
        raise ValueError(f"need 0 <= i < j < {trace.levels.shape[1]}")
    s = trace.s_grid
    gap = trace.levels[:, j] - trace.levels[:, i]
    lo, hi = (1, len(s) - 1) if interior and len(s) > 2 else (0, len(s))
    k = lo + int(np.argmin(gap[lo:hi]))
    s_star, g_star = float(s[k]), float(gap[k])
    if 0 < k < len(s) - 1:
        g0, g1, g2 = gap[k - 1], gap[k], gap[k + 1]
        h = s[k + 1] - s[k]
        curv = g0 - 2 * g1 + g2
        if curv > 0 and np.isclose(s[k] - s[k - 1], h):
            shift = 0.5 * h * (g0 - g2) / curv
            s_star = float(s[k] + shift)
            g_star = float(g1 - (g2 - g0) ** 2 / (8 * curv))
    return s_star, max(g_star, 0.0)
