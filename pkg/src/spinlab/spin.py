"""Collective spin states and operators in the symmetric (Dicke) subspace.

States of N two-mode bosons live in the N+1 dimensional space spanned by the
J_z eigenvectors |j, m>, j = N/2, m = -j..j.  Index k = 0..N corresponds to
m = k - N/2 throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

AXES = ("x", "y", "z")

NORM_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_n(N) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"particle number must be a positive integer, got {N!r}")
    return int(N)


def _check_axis(axis: str) -> str:
    axis = axis.lower().removeprefix("j")
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}, expected one of x, y, z")
    return axis


@dataclass(frozen=True, eq=False)
class DickeState:
    n_particles: int
    amplitudes: np.ndarray

    def __post_init__(self):
        N = _check_n(self.n_particles)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (N + 1,):
            raise ValueError(f"expected {N + 1} amplitudes, got shape {amps.shape}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_vector(cls, vec) -> DickeState:
        """Build a state from an arbitrary nonzero vector, normalizing it."""
        vec = np.asarray(vec, dtype=complex)
        return cls(vec.size - 1, vec / np.linalg.norm(vec))

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.n_particles + 1) - self.n_particles / 2

    def overlap(self, other: DickeState) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def same_ray(self, other: DickeState, tol: float = 1e-10) -> bool:
        """True if the states agree up to a global phase."""
        return abs(abs(self.overlap(other)) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    matrix: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 2:
            raise ValueError(f"operator must be a square matrix of size >= 2, got {mat.shape}")
        if not np.allclose(mat, mat.conj().T, rtol=0, atol=1e-12):
            raise ValueError("operator is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(mat))

    @property
    def n_particles(self) -> int:
        return self.matrix.shape[0] - 1

    def __add__(self, other: CollectiveOperator) -> CollectiveOperator:
        return CollectiveOperator(self.matrix + other.matrix)

    def __rmul__(self, scalar: float) -> CollectiveOperator:
        return CollectiveOperator(float(scalar) * self.matrix)


@lru_cache(maxsize=None)
def _spin_matrices(N: int) -> dict[str, np.ndarray]:
    m = np.arange(N + 1) - N / 2
    j = N / 2
    # <m+1| J+ |m>
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jp = np.diag(ladder, -1).astype(complex)
    mats = {
        "x": (jp + jp.T) / 2,
        "y": (jp - jp.T) / 2j,
        "z": np.diag(m).astype(complex),
    }
    for mat in mats.values():
        mat.setflags(write=False)
    return mats


def make_collective_operator(N: int, label: str) -> CollectiveOperator:
    """J_x, J_y or J_z for N particles, written in the J_z eigenbasis."""
    N = _check_n(N)
    axis = _check_axis(label)
    return CollectiveOperator(_spin_matrices(N)[axis], "J" + axis)


@lru_cache(maxsize=None)
def _eigensystem(N: int, axis: str) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and phase-fixed eigenvectors of J_axis.

    Cached per (N, axis); the returned arrays are read-only.
    """
    evals, evecs = np.linalg.eigh(_spin_matrices(N)[axis])
    gaps = np.diff(evals)
    if gaps.size and gaps.min() < 0.5:
        raise RuntimeError(f"degenerate spectrum for J{axis} at N={N}; basis construction is unreliable")
    # snap eigenvalues onto the exact m lattice and fix each column's phase so
    # that its largest component is real positive
    lattice = np.arange(N + 1) - N / 2
    if np.max(np.abs(evals - lattice)) > 1e-8:
        raise RuntimeError(f"J{axis} spectrum at N={N} is off the m lattice")
    evals = lattice
    pivot = np.argmax(np.abs(evecs) > np.abs(evecs).max(axis=0) * (1 - 1e-9), axis=0)
    phases = evecs[pivot, np.arange(N + 1)]
    evecs = evecs * (np.abs(phases) / phases)
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Measurement basis: eigenvectors of ``basis_operator`` ordered by ascending m.

    Outcome k carries parity (-1)**(k + parity_index_offset).
    """

    basis_operator: CollectiveOperator
    eigenvectors: np.ndarray
    parity_index_offset: int = 0

    def __post_init__(self):
        if self.parity_index_offset not in (0, 1):
            raise ValueError("parity_index_offset must be 0 or 1")
        vecs = np.asarray(self.eigenvectors, dtype=complex)
        dim = self.basis_operator.matrix.shape[0]
        if vecs.shape != (dim, dim):
            raise ValueError("eigenvector matrix does not match operator dimension")
        object.__setattr__(self, "eigenvectors", _frozen(vecs))

    @property
    def label(self) -> str:
        return self.basis_operator.label

    @property
    def n_particles(self) -> int:
        return self.basis_operator.n_particles

    @property
    def parity_signs(self) -> np.ndarray:
        k = np.arange(self.n_particles + 1)
        return np.where((k + self.parity_index_offset) % 2 == 0, 1.0, -1.0)

    def to_basis(self, vec: np.ndarray) -> np.ndarray:
        """Coordinates of Dicke-basis vector(s) in this basis."""
        return self.eigenvectors.conj().T @ vec

    def parity_operator(self) -> np.ndarray:
        """The parity operator written in the Dicke basis."""
        V = self.eigenvectors
        return (V * self.parity_signs) @ V.conj().T


def collective_basis(N: int, axis: str, parity_index_offset: int = 0) -> BasisSpec:
    N = _check_n(N)
    axis = _check_axis(axis)
    _, evecs = _eigensystem(N, axis)
    return BasisSpec(make_collective_operator(N, axis), evecs, parity_index_offset)


def coherent_state(N: int, axis: str = "x", sign: int = +1) -> DickeState:
    """Spin-coherent state: the extremal eigenvector of J_axis (m = +N/2 for sign=+1)."""
    N = _check_n(N)
    axis = _check_axis(axis)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _, evecs = _eigensystem(N, axis)
    return DickeState(N, evecs[:, -1 if sign > 0 else 0])


def rotation_matrix(N: int, axis: str, angle: float) -> np.ndarray:
    """exp(-i angle J_axis) in the Dicke basis."""
    evals, evecs = _eigensystem(_check_n(N), _check_axis(axis))
    return (evecs * np.exp(-1j * angle * evals)) @ evecs.conj().T


def rotate(state: DickeState, axis: str, angle: float) -> DickeState:
    """Apply exp(-i angle J_axis)."""
    if not np.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    evals, evecs = _eigensystem(state.n_particles, _check_axis(axis))
    coeffs = evecs.conj().T @ state.amplitudes
    return DickeState.from_vector(evecs @ (np.exp(-1j * angle * evals) * coeffs))


def oat_phases(N: int, chi_t: float) -> np.ndarray:
    m = np.arange(N + 1) - N / 2
    return np.exp(-1j * chi_t * m**2)


def oat_phase(state: DickeState, chi_t: float) -> DickeState:
    """One-axis twisting exp(-i chi_t J_z^2); diagonal in the Dicke basis."""
    if not np.isfinite(chi_t):
        raise ValueError("twisting strength must be finite")
    return DickeState.from_vector(state.amplitudes * oat_phases(state.n_particles, chi_t))


def _check_dims(state: DickeState, dim: int):
    if state.amplitudes.size != dim:
        raise ValueError(f"dimension mismatch: state has {state.amplitudes.size} amplitudes, expected {dim}")


def expectation_and_variance(state: DickeState, op: CollectiveOperator) -> tuple[float, float]:
    _check_dims(state, op.matrix.shape[0])
    psi = state.amplitudes
    m_psi = op.matrix @ psi
    mean = np.vdot(psi, m_psi).real
    second = np.vdot(m_psi, m_psi).real
    return float(mean), float(second - mean**2)


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probabilities over the integer-spaced outcomes m_k = k - N/2."""

    probabilities: np.ndarray
    sigma: float = 0.0
    basis_label: str = ""

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("probabilities must be a vector over N+1 >= 2 outcomes")
        if p.min() < -1e-14:
            raise ValueError(f"negative probability {p.min()!r}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probabilities", _frozen(p))

    @property
    def n_particles(self) -> int:
        return self.probabilities.size - 1

    @property
    def lattice(self) -> np.ndarray:
        return np.arange(self.n_particles + 1) - self.n_particles / 2

    def moments(self, values=None) -> tuple[float, float]:
        """Mean and variance of ``values`` (default: the outcome lattice)."""
        x = self.lattice if values is None else np.asarray(values, dtype=float)
        mean = float(self.probabilities @ x)
        return mean, float(self.probabilities @ (x - mean) ** 2)


def measurement_distribution(state: DickeState, basis: BasisSpec) -> OutcomeDistribution:
    _check_dims(state, basis.eigenvectors.shape[0])
    p = np.abs(basis.to_basis(state.amplitudes)) ** 2
    return OutcomeDistribution(p / p.sum(), basis_label=basis.label)


@dataclass(frozen=True)
class ParityResult:
    is_eigenstate: bool
    p: int | None = None


def parity_check(state: DickeState, basis: BasisSpec, tol: float = 1e-10) -> ParityResult:
    """Whether the state is an eigenstate of the basis parity operator.

    p = 0 for eigenvalue +1 and p = 1 for eigenvalue -1.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_dims(state, basis.eigenvectors.shape[0])
    c = basis.to_basis(state.amplitudes)
    flipped = basis.parity_signs * c
    if np.linalg.norm(flipped - c) <= tol:
        return ParityResult(True, 0)
    if np.linalg.norm(flipped + c) <= tol:
        return ParityResult(True, 1)
    return ParityResult(False, None)


def generator_flips_parity(G: CollectiveOperator, basis: BasisSpec, tol: float = 1e-10) -> bool:
    """True iff Pi G Pi = -G entrywise within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    V = basis.eigenvectors
    g = V.conj().T @ G.matrix @ V
    s = basis.parity_signs
    return bool(np.max(np.abs(s[:, None] * g * s[None, :] + g)) <= tol)


def generator_conserves_parity(G: CollectiveOperator, basis: BasisSpec, tol: float = 1e-10) -> bool:
    """True iff Pi G Pi = G entrywise within tol."""
    V = basis.eigenvectors
    g = V.conj().T @ G.matrix @ V
    s = basis.parity_signs
    return bool(np.max(np.abs(s[:, None] * g * s[None, :] - g)) <= tol)
