"""Functionals of outcome distributions: detection noise, Hellinger distance,
classical/quantum Fisher information and method-of-moments sensitivity.

Functions taking a ``protocol`` only need an object with
``outcome_derivatives(phis, sigma)`` returning ``(P, dP, d2P)`` arrays of shape
(len(phis), N+1) and a ``basis`` attribute; :class:`spinlab.protocols.ProtocolSpec`
provides both.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._optimize import golden_section_max, golden_section_min
from .spin import (
    BasisSpec,
    CollectiveOperator,
    DickeState,
    OutcomeDistribution,
    collective_basis,
    expectation_and_variance,
    generator_flips_parity,
    parity_check,
)

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-24
DEFAULT_PHASE_POINTS = 721
PHASE_REFINE_TOL = 1e-4


def default_phase_grid(points: int = DEFAULT_PHASE_POINTS) -> np.ndarray:
    """Uniform grid on [-pi/2, pi/2)."""
    return -np.pi / 2 + np.pi * np.arange(points) / points


# -- detection noise ---------------------------------------------------------


@lru_cache(maxsize=128)
def _noise_matrix(N: int, sigma: float) -> np.ndarray:
    if sigma == 0:
        K = np.eye(N + 1)
    else:
        d = np.arange(N + 1)[:, None] - np.arange(N + 1)[None, :]
        with np.errstate(over="ignore"):
            G = np.exp(-0.5 * (d / sigma) ** 2)
        # C_{k'} normalizes each source column over the physical outcome range
        K = G / G.sum(axis=0, keepdims=True)
    K.setflags(write=False)
    return K


@dataclass(frozen=True)
class NoiseKernel:
    """Discrete Gaussian detection noise of width ``sigma`` particles.

    ``matrix[k, k']`` is the probability of recording outcome k given true
    outcome k'; columns sum to one.
    """

    n_particles: int
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")

    @property
    def matrix(self) -> np.ndarray:
        return _noise_matrix(int(self.n_particles), float(self.sigma))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Apply the channel along the last axis (works for P, dP and d2P alike)."""
        if self.sigma == 0:
            return np.asarray(vectors)
        return np.asarray(vectors) @ self.matrix.T


def convolve_noise(P: OutcomeDistribution, sigma: float) -> OutcomeDistribution:
    kernel = NoiseKernel(P.n_particles, sigma)
    p = kernel.apply(P.probabilities)
    return OutcomeDistribution(p / p.sum(), sigma=float(sigma), basis_label=P.basis_label)


# -- distances and information -----------------------------------------------


def _probs(P) -> np.ndarray:
    return P.probabilities if isinstance(P, OutcomeDistribution) else np.asarray(P, dtype=float)


def hellinger_sq(P, Q) -> float:
    """Squared Hellinger distance 1 - sum_k sqrt(P_k Q_k).

    Evaluated as sum_k (sqrt(P_k) - sqrt(Q_k))^2 / 2, which equals the above for
    normalized inputs and keeps its accuracy when P and Q nearly coincide.
    """
    p, q = _probs(P), _probs(Q)
    if p.shape != q.shape:
        raise ValueError(f"lattice mismatch: {p.shape} vs {q.shape}")
    diff = np.sqrt(np.clip(p, 0, None)) - np.sqrt(np.clip(q, 0, None))
    return float(min(1.0, 0.5 * np.sum(diff**2)))


class SingularPhasePoint(ArithmeticError):
    """Raised when an outcome has vanishing probability but a finite slope."""


def cfi_from_distribution_pair(P, dP, d2P=None, floor: float = EPS_FLOOR) -> float:
    """Classical Fisher information sum_k dP_k^2 / P_k.

    Outcomes with P_k < floor are handled separately.  With the second
    derivative available they contribute their limiting value 2 d2P_k (exact
    where the probability touches zero quadratically, which is what the parity
    structure produces at phi = 0).  Without it, such terms are dropped if the
    slope is also negligible and raise :class:`SingularPhasePoint` otherwise.
    """
    p = _probs(P)
    dp = np.asarray(dP, dtype=float)
    if dp.shape != p.shape:
        raise ValueError("P and dP must have the same shape")
    if abs(dp.sum()) > 1e-10:
        raise ValueError(f"dP must sum to zero, got {dp.sum()!r}")
    small = p < floor
    regular = np.sum(dp[~small] ** 2 / p[~small])
    if not small.any():
        return float(regular)
    if d2P is not None:
        d2p = np.asarray(d2P, dtype=float)[small]
        return float(regular + np.sum(np.clip(2 * d2p, 0, None)))
    if np.any(np.abs(dp[small]) >= np.sqrt(floor)):
        k = int(np.flatnonzero(small & (np.abs(dp) >= np.sqrt(floor)))[0])
        raise SingularPhasePoint(f"outcome {k} has P={p[k]:.3g} but dP={dp[k]:.3g}")
    return float(regular)


def _cfi_rows(P: np.ndarray, dP: np.ndarray, d2P: np.ndarray, floor: float = EPS_FLOOR) -> np.ndarray:
    """Row-wise CFI for stacks of distributions; same limit rule as above."""
    safe = np.where(P < floor, 1.0, P)
    terms = np.where(P < floor, np.clip(2 * d2P, 0, None), dP**2 / safe)
    return terms.sum(axis=-1)


def qfi_pure(state: DickeState, G: CollectiveOperator) -> float:
    """Quantum Fisher information 4 Var(G) of a pure state."""
    return 4.0 * expectation_and_variance(state, G)[1]


def phase_derivatives(state: DickeState, G: CollectiveOperator, basis: BasisSpec,
                      readout: np.ndarray | None = None, phi: float = 0.0, sigma: float = 0.0):
    """P, dP/dphi and d2P/dphi2 for U2 exp(-i phi G)|state> measured in ``basis``.

    ``readout`` is an optional unitary matrix U2.  Works for arbitrary
    (custom) generators and states.
    """
    evals, W = np.linalg.eigh(G.matrix)
    a = np.exp(-1j * phi * evals) * (W.conj().T @ state.amplitudes)
    M = W if readout is None else readout @ W
    M = basis.to_basis(M)
    c, dc, d2c = M @ a, M @ (-1j * evals * a), M @ (-(evals**2) * a)
    P = np.abs(c) ** 2
    dP = 2 * np.real(c.conj() * dc)
    d2P = 2 * np.abs(dc) ** 2 + 2 * np.real(c.conj() * d2c)
    if sigma:
        kernel = NoiseKernel(basis.n_particles, sigma)
        P, dP, d2P = kernel.apply(P), kernel.apply(dP), kernel.apply(d2P)
    return P, dP, d2P


# -- optimal basis -----------------------------------------------------------


def find_optimal_basis(initial_state: DickeState, u1_steps, G: CollectiveOperator,
                       candidates=None, tol: float = 1e-10) -> BasisSpec | None:
    """First candidate basis in which U1|psi0> is a parity eigenstate and G flips parity.

    ``u1_steps`` is a sequence of objects with an ``apply(state)`` method.
    Candidates default to the J_x, J_y, J_z eigenbases in that order.
    """
    state = initial_state
    for step in u1_steps:
        state = step.apply(state)
    if candidates is None:
        candidates = [collective_basis(initial_state.n_particles, a) for a in "xyz"]
    for basis in candidates:
        if parity_check(state, basis, tol).is_eigenstate and generator_flips_parity(G, basis, tol):
            return basis
    return None


# -- phase scans -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FisherCurve:
    """A CFI (kind='cfi', maximized) or moment Delta-phi^2 (kind='moment', minimized) curve."""

    phase_grid: np.ndarray
    values: np.ndarray
    kind: str
    best_value: float
    best_phase: float
    skipped: tuple = field(default=())

    @property
    def max_value(self) -> float:
        return self.best_value if self.kind == "cfi" else float(np.max(self.values))

    @property
    def argmax_phase(self) -> float:
        return self.best_phase if self.kind == "cfi" else float(self.phase_grid[np.argmax(self.values)])


def _pick(values: np.ndarray, grid: np.ndarray, maximize: bool, rel_tie: float = 1e-9) -> int:
    """Index of the optimum; near-ties resolve toward phi = 0."""
    finite = np.isfinite(values)
    if not finite.any():
        raise ValueError("no finite values on the phase grid")
    v = np.where(finite, values, -np.inf if maximize else np.inf)
    best = v.max() if maximize else v.min()
    close = np.abs(v - best) <= rel_tie * max(abs(best), 1e-300)
    idx = np.flatnonzero(close)
    return int(idx[np.argmin(np.abs(grid[idx]))])


def _refine(f, grid: np.ndarray, i: int, maximize: bool, best: float):
    lo = grid[i - 1] if i > 0 else grid[i]
    hi = grid[i + 1] if i < grid.size - 1 else grid[i]
    if hi - lo <= PHASE_REFINE_TOL:
        return float(grid[i]), best
    search = golden_section_max if maximize else golden_section_min
    x, fx = search(f, float(lo), float(hi), tol=PHASE_REFINE_TOL)
    if np.isfinite(fx) and ((fx > best) if maximize else (fx < best)):
        return float(x), float(fx)
    return float(grid[i]), best


def cfi_curve_values(protocol, phis, sigma: float = 0.0) -> np.ndarray:
    P, dP, d2P = protocol.outcome_derivatives(np.atleast_1d(phis), sigma)
    return _cfi_rows(P, dP, d2P)


def state_phase_derivative(protocol, phi: float, sigma: float = 0.0) -> np.ndarray:
    """Analytic d P_k / d phi at ``phi`` (noise channel applied when sigma > 0)."""
    _, dP, _ = protocol.outcome_derivatives(np.array([phi], dtype=float), sigma)
    return dP[0]


def max_cfi_over_phase(protocol, sigma: float = 0.0, phase_grid=None) -> FisherCurve:
    grid = default_phase_grid() if phase_grid is None else np.asarray(phase_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("phase grid is empty")
    P, dP, d2P = protocol.outcome_derivatives(grid, sigma)
    values = _cfi_rows(P, dP, d2P)
    bad = ~np.isfinite(values)
    skipped = tuple(float(x) for x in grid[bad])
    if skipped:
        log.warning("skipped %d singular phase points", len(skipped))
    i = _pick(values, grid, maximize=True)

    def f(phi):
        return float(cfi_curve_values(protocol, [phi], sigma)[0])

    phase, best = _refine(f, grid, i, True, float(values[i]))
    return FisherCurve(grid, values, "cfi", best, phase, skipped)


def _signal_values(basis: BasisSpec, signal: CollectiveOperator, tol: float = 1e-9) -> np.ndarray:
    V = basis.eigenvectors
    s = V.conj().T @ signal.matrix @ V
    off = s - np.diag(np.diag(s))
    if np.max(np.abs(off), initial=0.0) > tol:
        raise ValueError(f"signal {signal.label} is not diagonal in the {basis.label} basis")
    return np.diag(s).real


def moment_values(protocol, signal: CollectiveOperator, phis, sigma: float = 0.0,
                  eps: float = 1e-12) -> np.ndarray:
    """Delta-phi^2 = Var[S] / (d<S>/dphi)^2 from the (noisy) outcome distribution."""
    s = _signal_values(protocol.basis, signal)
    P, dP, _ = protocol.outcome_derivatives(np.atleast_1d(np.asarray(phis, dtype=float)), sigma)
    mean = P @ s
    var = np.einsum("pk,pk->p", P, (s[None, :] - mean[:, None]) ** 2)
    slope = dP @ s
    with np.errstate(divide="ignore", invalid="ignore"):
        out = var / slope**2
    return np.where(np.abs(slope) < eps, np.inf, out)


def moment_sensitivity(protocol, signal: CollectiveOperator, phase_grid=None,
                       sigma: float = 0.0) -> FisherCurve:
    """Method-of-moments sensitivity curve; ``best_value`` is the minimum Delta-phi^2.

    Grid points with vanishing slope carry ``inf``.
    """
    grid = default_phase_grid() if phase_grid is None else np.asarray(phase_grid, dtype=float)
    values = moment_values(protocol, signal, grid, sigma)
    i = _pick(values, grid, maximize=False)

    def f(phi):
        return float(moment_values(protocol, signal, [phi], sigma)[0])

    phase, best = _refine(f, grid, i, False, float(values[i]))
    return FisherCurve(grid, values, "moment", best, phase)
