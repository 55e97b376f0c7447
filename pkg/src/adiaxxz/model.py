"""Hamiltonians, schedules and protocol descriptions for the XXZ ring.

Units: hbar = 1 and energies in units of J; times are in 1/J.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .pauli import PauliString, commutator, eigendecompose, realize

AXES = ("X", "Y", "Z")
UNIT_ATOL = 1e-12


@dataclass(frozen=True)
class XXZParams:
    n: int
    delta: float
    J: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"XXZ ring needs n >= 2, got {self.n}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "J", float(self.J))


def _unit(v) -> tuple[float, float, float]:
    v = tuple(float(x) for x in v)
    if len(v) != 3:
        raise ValueError(f"direction must have 3 components, got {v}")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_ATOL:
        raise ValueError(f"direction {v} is not a unit vector")
    return v


def direction_from_angles(theta: float, phi: float) -> tuple[float, float, float]:
    return (
        float(np.sin(theta) * np.cos(phi)),
        float(np.sin(theta) * np.sin(phi)),
        float(np.cos(theta)),
    )


@dataclass(frozen=True)
class InitialField:
    """Local fields of the initial Hamiltonian ``eps * sum_j u_j . sigma_j``.

    The conventional transverse-field start ``-eps * sum_j sigma^x_j`` is
    ``InitialField.transverse(n)``, i.e. every ``u_j = (-1, 0, 0)``.
    """

    directions: tuple[tuple[float, float, float], ...]
    epsilon: float = 1.0

    def __post_init__(self):
        dirs = tuple(_unit(d) for d in self.directions)
        if not dirs:
            raise ValueError("need at least one site")
        object.__setattr__(self, "directions", dirs)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def n(self) -> int:
        return len(self.directions)

    @classmethod
    def transverse(cls, n: int, epsilon: float = 1.0) -> "InitialField":
        return cls(((-1.0, 0.0, 0.0),) * n, epsilon)

    @classmethod
    def from_angles(cls, thetas: Sequence[float], phis: Sequence[float], epsilon: float = 1.0) -> "InitialField":
        if len(thetas) != len(phis):
            raise ValueError("thetas and phis must have the same length")
        return cls(tuple(direction_from_angles(t, p) for t, p in zip(thetas, phis)), epsilon)

    @classmethod
    def neel(cls, n: int, axis: str = "Z", epsilon: float = 1.0) -> "InitialField":
        """Field pattern whose product ground state is a Neel state along ``axis``."""
        e = np.zeros(3)
        e[AXES.index(axis.upper())] = 1.0
        return cls(tuple(tuple((-1) ** j * e) for j in range(n)), epsilon)

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Canonical polar angles, theta in [0, pi] and phi in [0, 2 pi)."""
        u = np.array(self.directions)
        theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2 * np.pi)
        return theta, phi


@dataclass(frozen=True)
class AuxiliaryField:
    omegas: tuple[float, ...]

    def __post_init__(self):
        omegas = tuple(float(w) for w in self.omegas)
        if not all(np.isfinite(omegas)):
            raise ValueError("auxiliary field strengths must be finite")
        object.__setattr__(self, "omegas", omegas)

    @property
    def n(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class Schedule:
    """Smooth ramp lambda(s) on [0, 1] with lambda(0)=0, lambda(1)=1 and flat ends.

    ``kind="sin2sin2"`` is sin^2[(pi/2) sin^2(pi s / 2)]; ``"smoothstep"`` is
    the cubic 3 s^2 - 2 s^3.
    """

    kind: str = "sin2sin2"

    def __post_init__(self):
        if self.kind not in ("sin2sin2", "smoothstep"):
            raise ValueError(f"unknown schedule {self.kind!r}")

    @staticmethod
    def _check(s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0) or np.any(s > 1.0) or np.any(np.isnan(s)):
            raise ValueError("normalized time must lie in [0, 1]")
        return s

    def value(self, s):
        s = self._check(s)
        if self.kind == "smoothstep":
            out = s * s * (3.0 - 2.0 * s)
        else:
            out = np.sin(0.5 * np.pi * np.sin(0.5 * np.pi * s) ** 2) ** 2
        return out if out.ndim else float(out)

    def derivative(self, s):
        s = self._check(s)
        if self.kind == "smoothstep":
            out = 6.0 * s * (1.0 - s)
        else:
            g = np.sin(0.5 * np.pi * s) ** 2
            out = 0.25 * np.pi**2 * np.sin(np.pi * g) * np.sin(np.pi * s)
        return out if out.ndim else float(out)


def lambda_value(s, schedule: Schedule = Schedule()):
    return schedule.value(s)


def lambda_derivative(s, schedule: Schedule = Schedule()):
    return schedule.derivative(s)


@dataclass(frozen=True)
class CounterdiabaticTerm:
    """First-order counterdiabatic strength; ``bound=None`` means 10 * epsilon."""

    alpha: float = 0.0
    bound: float | None = None


@dataclass(frozen=True)
class ProtocolSpec:
    xxz: XXZParams
    initial: InitialField
    total_time: float
    aux: AuxiliaryField | None = None
    cd: CounterdiabaticTerm | None = None
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError(f"total time must be positive, got {self.total_time}")
        object.__setattr__(self, "total_time", float(self.total_time))
        if self.initial.n != self.xxz.n:
            raise ValueError(f"initial field has {self.initial.n} sites, model has {self.xxz.n}")
        if self.aux is not None and self.aux.n != self.xxz.n:
            raise ValueError(f"auxiliary field has {self.aux.n} sites, model has {self.xxz.n}")
        if self.cd is not None and abs(self.cd.alpha) > self.alpha_bound:
            raise ValueError(f"|alpha| = {abs(self.cd.alpha)} exceeds the bound {self.alpha_bound}")

    @property
    def n(self) -> int:
        return self.xxz.n

    @property
    def alpha_bound(self) -> float:
        if self.cd is not None and self.cd.bound is not None:
            return float(self.cd.bound)
        return 10.0 * self.initial.epsilon

    def replace(self, **changes) -> "ProtocolSpec":
        return replace(self, **changes)

    def normalized(self, t):
        """Map physical time to s = t/T, rejecting times outside [0, T]."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.total_time):
            raise ValueError(f"time outside [0, {self.total_time}]")
        s = t / self.total_time
        return s if s.ndim else float(s)


def standard_spec(n: int, delta: float, total_time: float, **kw) -> ProtocolSpec:
    """Transverse-field start, no auxiliary field, no CD term."""
    return ProtocolSpec(XXZParams(n, delta), InitialField.transverse(n), total_time, **kw)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def target_strings(p: XXZParams) -> list[PauliString]:
    out = []
    for j in range(p.n):
        k = (j + 1) % p.n
        out += [
            PauliString.on_sites(p.n, {j: "X", k: "X"}, p.J),
            PauliString.on_sites(p.n, {j: "Y", k: "Y"}, p.J),
            PauliString.on_sites(p.n, {j: "Z", k: "Z"}, p.J * p.delta),
        ]
    return out


@lru_cache(maxsize=32)
def build_target(p: XXZParams) -> np.ndarray:
    """Periodic XXZ ring. For n=2 the bond (1,2) is summed twice, as written."""
    return _frozen(realize(target_strings(p)))


@lru_cache(maxsize=256)
def build_initial(f: InitialField) -> np.ndarray:
    strings = [
        PauliString.on_sites(f.n, {j: ax}, f.epsilon * u[a])
        for j, u in enumerate(f.directions)
        for a, ax in enumerate(AXES)
        if u[a] != 0.0
    ]
    return _frozen(realize(strings, f.n))


@lru_cache(maxsize=256)
def build_aux(a: AuxiliaryField) -> np.ndarray:
    # diagonal by construction; avoids kron round-off in off-diagonal zeros
    n = a.n
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    diag = (1 - 2 * bits) @ np.array(a.omegas, dtype=float)
    return _frozen(np.diag(diag.astype(complex)))


def total_magnetization(n: int) -> np.ndarray:
    return realize([PauliString.on_sites(n, {j: "Z"}) for j in range(n)])


def single_site_ground(u: Sequence[float]) -> np.ndarray:
    """Spinor pointing along -u, i.e. the -1 eigenvector of u . sigma."""
    m = -np.asarray(u, dtype=float)
    theta = np.arctan2(np.hypot(m[0], m[1]), m[2])  # arccos loses tilts near the poles
    phi = np.arctan2(m[1], m[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_ground_state(f: InitialField) -> np.ndarray:
    psi = np.ones(1, dtype=complex)
    for u in f.directions:
        psi = np.kron(psi, single_site_ground(u))
    lead = psi[np.argmax(np.abs(psi) > 1e-12)]
    psi = psi * (abs(lead) / lead)
    return psi / np.linalg.norm(psi)


def product_energy(p: XXZParams, f: InitialField) -> float:
    """<Phi|H_f|Phi> for the product ground state of ``f``, via Bloch vectors."""
    m = -np.array(f.directions)
    nxt = np.roll(m, -1, axis=0)
    bond = m[:, 0] * nxt[:, 0] + m[:, 1] * nxt[:, 1] + p.delta * m[:, 2] * nxt[:, 2]
    return float(p.J * bond.sum())


def initial_hamiltonian(spec: ProtocolSpec) -> np.ndarray:
    return build_initial(spec.initial)


def target_hamiltonian(spec: ProtocolSpec) -> np.ndarray:
    return build_target(spec.xxz)


def assemble(spec: ProtocolSpec, t: float) -> np.ndarray:
    """CD-free Hamiltonian (1-lam) H_i + lam H_f [+ lam (1-lam) H_aux] at time t."""
    lam = spec.schedule.value(spec.normalized(t))
    h = (1.0 - lam) * build_initial(spec.initial) + lam * build_target(spec.xxz)
    if spec.aux is not None:
        h = h + lam * (1.0 - lam) * build_aux(spec.aux)
    return h


def partial_lambda(spec: ProtocolSpec, lam: float) -> np.ndarray:
    """Derivative of the CD-free Hamiltonian with respect to lambda."""
    d = build_target(spec.xxz) - build_initial(spec.initial)
    if spec.aux is not None:
        d = d + (1.0 - 2.0 * lam) * build_aux(spec.aux)
    return d


def lambda_rate(spec: ProtocolSpec, t):
    """d lambda / dt = (1/T) d lambda / ds."""
    return spec.schedule.derivative(spec.normalized(t)) / spec.total_time


def cd_first_order(spec: ProtocolSpec, t: float) -> np.ndarray:
    """i * (d lambda/dt) * alpha * [H_ad(t), d_lambda H_ad(t)]."""
    if spec.cd is None:
        raise ValueError("protocol has no counterdiabatic term")
    if abs(spec.cd.alpha) > spec.alpha_bound:
        raise ValueError(f"|alpha| = {abs(spec.cd.alpha)} exceeds the bound {spec.alpha_bound}")
    lam = spec.schedule.value(spec.normalized(t))
    bracket = commutator(assemble(spec, t), partial_lambda(spec, lam))
    return 1j * lambda_rate(spec, t) * spec.cd.alpha * bracket


class DegeneracyError(ValueError):
    pass


def exact_cd_operator(h: np.ndarray, dh_dt: np.ndarray, gap_floor: float = 1e-6, where: str = "") -> np.ndarray:
    """i sum_{m != n} |m><m| dH/dt |n><n| / (E_n - E_m) for a dense Hermitian ``h``.

    Eigenvalues closer than ``gap_floor`` are merged into one cluster and
    pairs inside a cluster are dropped. Raises :class:`DegeneracyError` when
    the ground level belongs to a nontrivial cluster.
    """
    spectrum = eigendecompose(h)
    e, v = spectrum.eigenvalues, spectrum.eigenvectors
    cluster = np.concatenate([[0], np.cumsum(np.diff(e) > gap_floor)])
    ground = np.flatnonzero(cluster == 0)
    if len(ground) > 1:
        raise DegeneracyError(
            f"ground level is degenerate{where}: levels {ground.tolist()} with energies {e[ground].tolist()}"
        )
    m = v.conj().T @ dh_dt @ v
    gaps = e[None, :] - e[:, None]  # E_n - E_m at [m, n]
    keep = cluster[:, None] != cluster[None, :]
    coeffs = np.zeros_like(m)
    coeffs[keep] = m[keep] / gaps[keep]
    out = 1j * (v @ coeffs @ v.conj().T)
    return 0.5 * (out + out.conj().T)


def cd_exact(spec: ProtocolSpec, t: float, gap_floor: float = 1e-6) -> np.ndarray:
    """Exact counterdiabatic operator of the CD-free Hamiltonian at time t."""
    lam = spec.schedule.value(spec.normalized(t))
    dh = lambda_rate(spec, t) * partial_lambda(spec, lam)
    return exact_cd_operator(assemble(spec, t), dh, gap_floor, where=f" at t={t}")


# Linear-combination view used by the propagator: H(t) = sum_k c_k(t) M_k.


def hamiltonian_terms(spec: ProtocolSpec, with_cd: bool) -> list[np.ndarray]:
    """Time-independent operators whose combination gives the full Hamiltonian.

    Order: H_i, H_f, then H_aux (if present), then i[H_i, H_f] and, with aux,
    i[H_i, H_aux] and i[H_f, H_aux] (if ``with_cd``). Coefficients come from
    :func:`term_coefficients`.
    """
    hi, hf = build_initial(spec.initial), build_target(spec.xxz)
    terms = [hi, hf]
    ha = build_aux(spec.aux) if spec.aux is not None else None
    if ha is not None:
        terms.append(ha)
    if with_cd:
        if spec.cd is None:
            raise ValueError("protocol has no counterdiabatic term")
        terms.append(1j * commutator(hi, hf))
        if ha is not None:
            terms += [1j * commutator(hi, ha), 1j * commutator(hf, ha)]
    return terms


def term_coefficients(spec: ProtocolSpec, t, with_cd: bool) -> np.ndarray:
    """Coefficients for :func:`hamiltonian_terms`, shape ``t.shape + (K,)``.

    Uses [A, B] with A = (1-l)H_i + l H_f + l(1-l)H_aux, B = H_f - H_i + (1-2l)H_aux,
    which reduces to [H_i,H_f] + (1-l)^2 [H_i,H_aux] - l^2 [H_f,H_aux].
    """
    s = np.asarray(spec.normalized(t))
    lam = spec.schedule.value(s)
    cols = [1.0 - lam, lam]
    if spec.aux is not None:
        cols.append(lam * (1.0 - lam))
    if with_cd:
        if abs(spec.cd.alpha) > spec.alpha_bound:
            raise ValueError(f"|alpha| = {abs(spec.cd.alpha)} exceeds the bound {spec.alpha_bound}")
        rate = spec.cd.alpha * spec.schedule.derivative(s) / spec.total_time
        cols.append(rate)
        if spec.aux is not None:
            cols += [rate * (1.0 - lam) ** 2, -rate * lam**2]
    return np.stack(np.broadcast_arrays(*cols), axis=-1).astype(float)


@lru_cache(maxsize=32)
def target_ground_energy(p: XXZParams) -> float:
    return eigendecompose(build_target(p)).ground_energy
