"""Pauli-string algebra, dense operator realization and the shared eigensolver.

Operators are plain complex ``numpy`` arrays of shape ``(2**n, 2**n)``. Site 0
is the most significant qubit of the computational-basis index, and ``|0>`` is
the ``+1`` eigenstate of sigma^z.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

MAX_SITES = 12
HERMITIAN_ATOL = 1e-12
_PHASE_ATOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class NonHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """Product of single-site Pauli factors times a real coefficient."""

    factors: tuple[str, ...]
    coeff: float = 1.0

    def __post_init__(self):
        factors = tuple(str(f).upper() for f in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ValueError("a Pauli string needs at least one site")
        bad = [f for f in factors if f not in PAULI]
        if bad:
            raise ValueError(f"unknown Pauli factors {bad}; expected I, X, Y or Z")
        if not np.isfinite(self.coeff):
            raise ValueError(f"coefficient must be finite, got {self.coeff}")
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def n(self) -> int:
        return len(self.factors)

    @classmethod
    def on_sites(cls, n: int, ops: Mapping[int, str], coeff: float = 1.0) -> "PauliString":
        """Build a string from a sparse ``{site: axis}`` mapping; other sites get I."""
        factors = ["I"] * n
        for site, axis in ops.items():
            if not 0 <= site < n:
                raise ValueError(f"site {site} out of range for n={n}")
            factors[site] = axis
        return cls(tuple(factors), coeff)

    def is_identity(self) -> bool:
        return all(f == "I" for f in self.factors)

    def matrix(self) -> np.ndarray:
        return self.coeff * reduce(np.kron, (PAULI[f] for f in self.factors))


def _check_sites(n: int) -> None:
    if n < 1:
        raise ValueError(f"site count must be positive, got {n}")
    if n > MAX_SITES:
        raise ValueError(f"n={n} exceeds the dense-matrix budget of {MAX_SITES} sites")


def single_site(axis: str, site: int, n: int) -> np.ndarray:
    """Embed sigma^axis at ``site`` of an ``n``-site register."""
    _check_sites(n)
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for n={n}")
    axis = axis.upper()
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
    return PauliString.on_sites(n, {site: axis}).matrix()


def realize(strings: Iterable[PauliString], n: int | None = None) -> np.ndarray:
    """Sum a list of Pauli strings into a dense Hermitian matrix.

    An empty list is only allowed when ``n`` is given, in which case the zero
    operator of dimension ``2**n`` is returned.
    """
    strings = list(strings)
    sizes = {s.n for s in strings}
    if n is not None:
        sizes.add(n)
    if not sizes:
        raise ValueError("cannot realize an empty list without a site count")
    if len(sizes) > 1:
        raise ValueError(f"Pauli strings act on different site counts: {sorted(sizes)}")
    (n,) = sizes
    _check_sites(n)
    out = np.zeros((2**n, 2**n), dtype=complex)
    for s in strings:
        out += s.matrix()
    return out


def is_hermitian(h: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.all(np.abs(h - h.conj().T) <= atol))


def check_operator(h: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate shape and Hermiticity; returns ``h`` as a complex array."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"operator must be square, got shape {h.shape}")
    dim = h.shape[0]
    if dim < 1 or dim & (dim - 1):
        raise ValueError(f"operator dimension {dim} is not a power of two")
    if not is_hermitian(h, atol):
        err = float(np.max(np.abs(h - h.conj().T)))
        raise NonHermitianError(f"operator is not Hermitian (max deviation {err:.3e})")
    return h


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


def fix_phases(vectors: np.ndarray, atol: float = _PHASE_ATOL) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real and positive."""
    vectors = np.array(vectors, dtype=complex, copy=True)
    flat = vectors.ndim == 1
    if flat:
        vectors = vectors[:, None]
    mags = np.abs(vectors)
    lead = np.argmax(mags > atol, axis=0)
    cols = np.arange(vectors.shape[1])
    pivots = vectors[lead, cols]
    safe = np.where(np.abs(pivots) > 0, pivots, 1.0)
    vectors *= (np.abs(safe) / safe)[None, :]
    return vectors[:, 0] if flat else vectors


def eigendecompose(h: np.ndarray) -> Spectrum:
    h = check_operator(h)
    # symmetrize away rounding so eigh sees an exactly Hermitian matrix
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return Spectrum(vals, fix_phases(vecs))
