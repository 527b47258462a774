"""Interferometry protocols |psi_phi> = U2 exp(-i phi G) U1 |psi0> built from
one-axis twisting and collective rotations."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .estimation import NoiseKernel, find_optimal_basis, max_cfi_over_phase
from .spin import (
    AXES,
    BasisSpec,
    DickeState,
    OutcomeDistribution,
    _eigensystem,
    coherent_state,
    collective_basis,
    parity_check,
    make_collective_operator,
    oat_phase,
    oat_phases,
    rotate,
    rotation_matrix,
)

KINDS = ("trivial", "echo", "pseudo-echo", "asymmetric", "pseudo-forward", "ghz-readout")
FAMILIES = ("asymmetric-reversed", "pseudo-forward")
GHZ_CHI_T = math.pi / 2


@dataclass(frozen=True)
class Step:
    """A primitive unitary: ``oat`` applies exp(-i value J_z^2), ``rotate``
    applies exp(-i value J_axis)."""

    kind: str
    value: float
    axis: str = "z"

    def __post_init__(self):
        if self.kind not in ("oat", "rotate"):
            raise ValueError(f"unknown step kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"step parameter must be finite, got {self.value!r}")
        if self.kind == "rotate" and self.axis not in AXES:
            raise ValueError(f"unknown rotation axis {self.axis!r}")

    def apply(self, state: DickeState) -> DickeState:
        if self.kind == "oat":
            return oat_phase(state, self.value)
        return rotate(state, self.axis, self.value)

    def apply_matrix(self, M: np.ndarray) -> np.ndarray:
        """Left-multiply a matrix whose columns are Dicke-basis vectors."""
        N = M.shape[0] - 1
        if self.kind == "oat":
            return oat_phases(N, self.value)[:, None] * M
        return rotation_matrix(N, self.axis, self.value) @ M

    def inverse(self) -> Step:
        return replace(self, value=-self.value)


def oat(chi_t: float) -> Step:
    return Step("oat", float(chi_t))


def rot(axis: str, angle: float) -> Step:
    return Step("rotate", float(angle), axis)


def inverse_steps(steps) -> tuple[Step, ...]:
    return tuple(s.inverse() for s in reversed(steps))


# -- squeezing angle ---------------------------------------------------------


def _jz_variance_coefficients(state: DickeState) -> tuple[float, float, float]:
    """Var(J_z) after exp(-i theta J_x) equals A + B cos(2 theta) + C sin(2 theta)."""
    mats = {a: make_collective_operator(state.n_particles, a).matrix for a in "yz"}
    psi = state.amplitudes
    vy, vz = mats["y"] @ psi, mats["z"] @ psi
    my, mz = np.vdot(psi, vy).real, np.vdot(psi, vz).real
    var_y = np.vdot(vy, vy).real - my**2
    var_z = np.vdot(vz, vz).real - mz**2
    cov = np.vdot(vy, vz).real - my * mz
    # the rotated J_z is J_z cos(theta) + J_y sin(theta)
    return (var_z + var_y) / 2, (var_z - var_y) / 2, cov


@lru_cache(maxsize=4096)
def squeezing_angle(N: int, chi_t: float) -> float:
    """Rotation angle in [0, pi) about x minimizing Var(J_z) of the twisted x-coherent state.

    Var(J_z) is a pure sinusoid in 2*theta, so the minimizer is taken in
    closed form.  Returns 0 when Var(J_z) does not depend on the angle.
    """
    if not chi_t >= 0 or not math.isfinite(chi_t):
        raise ValueError(f"twisting strength must be finite and >= 0, got {chi_t!r}")
    state = oat_phase(coherent_state(N, "x"), chi_t)
    A, B, C = _jz_variance_coefficients(state)
    if math.hypot(B, C) <= 1e-12 * max(A, 1.0):
        return 0.0
    theta = (math.atan2(C, B) + math.pi) / 2 % math.pi
    if math.pi - theta < 1e-12:
        theta = 0.0
    return float(theta)


@lru_cache(maxsize=None)
def ghz_alignment_steps(N: int) -> tuple[Step, ...]:
    """Rotations that turn the even-N twisted cat (along x) onto the J_y axis.

    For odd N, and for N = 2, the cat produced at chi t = pi/2 already has
    4 Var(J_y) = N^2 and nothing is added.  Otherwise a quarter turn about z
    aligns the cat with the phase generator, and a phase-origin shift of
    +-pi/(2N) about y restores J_x parity.
    """
    if N % 2 or N == 2:
        return ()

    cat = oat_phase(coherent_state(N, "x"), GHZ_CHI_T)
    basis = collective_basis(N, "x")
    for sign in (1, -1):
        steps = (rot("z", math.pi / 2), rot("y", sign * math.pi / (2 * N)))
        state = cat
        for step in steps:
            state = step.apply(state)
        if parity_check(state, basis, 1e-9).is_eigenstate:
            return steps
    raise RuntimeError(f"could not align the N={N} cat state with J_y")


def oat_unitary_steps(N: int, chi_t: float) -> tuple[Step, ...]:
    """Steps of U_OAT(t) = exp(-i theta J_x) exp(-i chi_t J_z^2), applied twisting first.

    At chi_t = pi/2 the GHZ alignment rotations are appended.
    """
    if chi_t == 0:
        return ()
    steps = (oat(chi_t), rot("x", squeezing_angle(N, chi_t)))
    if chi_t == GHZ_CHI_T:
        steps += ghz_alignment_steps(N)
    return steps


# -- protocol specification and evaluation -----------------------------------


@dataclass(frozen=True)
class ProtocolSpec:
    n_particles: int
    u1_steps: tuple = ()
    u2_steps: tuple = ()
    generator: str = "Jy"
    initial: tuple = ("x", 1)
    measurement_basis: str = "auto"
    signal: str | None = None
    kind: str = "custom"

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError("n_particles must be a positive integer")
        object.__setattr__(self, "u1_steps", tuple(self.u1_steps))
        object.__setattr__(self, "u2_steps", tuple(self.u2_steps))
        for s in self.u1_steps + self.u2_steps:
            if not isinstance(s, Step):
                raise TypeError(f"expected Step, got {type(s).__name__}")

    def initial_state(self) -> DickeState:
        return coherent_state(self.n_particles, *self.initial)

    def entangled_state(self) -> DickeState:
        """U1 |psi0>."""
        state = self.initial_state()
        for step in self.u1_steps:
            state = step.apply(state)
        return state

    def generator_operator(self):
        return make_collective_operator(self.n_particles, self.generator)

    @property
    def basis(self) -> BasisSpec:
        return _compile(self).basis

    def outcome_derivatives(self, phis, sigma: float = 0.0):
        return _compile(self).outcome_derivatives(np.asarray(phis, dtype=float), sigma)

    def final_state(self, phi: float) -> DickeState:
        return _compile(self).final_state(phi)


class BasisDiscoveryError(RuntimeError):
    pass


def resolve_basis(spec: ProtocolSpec) -> BasisSpec:
    if spec.measurement_basis != "auto":
        return collective_basis(spec.n_particles, spec.measurement_basis)
    basis = find_optimal_basis(spec.initial_state(), spec.u1_steps, spec.generator_operator())
    if basis is None:
        raise BasisDiscoveryError(
            f"no candidate basis satisfies the parity conditions for protocol {spec.kind!r}")
    return basis


@dataclass(eq=False)
class _CompiledProtocol:
    basis: BasisSpec
    gen_evals: np.ndarray
    gen_coeffs: np.ndarray  # U1|psi0> in the generator eigenbasis
    readout: np.ndarray  # U2 W, columns are U2 applied to generator eigenvectors
    to_outcomes: np.ndarray  # B^dagger U2 W

    def _amplitudes(self, phis: np.ndarray):
        E = np.exp(-1j * np.outer(phis, self.gen_evals)) * self.gen_coeffs
        M = self.to_outcomes.T
        c = E @ M
        dc = (-1j * self.gen_evals * E) @ M
        d2c = (-(self.gen_evals**2) * E) @ M
        return c, dc, d2c

    def outcome_derivatives(self, phis: np.ndarray, sigma: float):
        c, dc, d2c = self._amplitudes(np.atleast_1d(phis))
        P = np.abs(c) ** 2
        dP = 2 * np.real(c.conj() * dc)
        d2P = 2 * np.abs(dc) ** 2 + 2 * np.real(c.conj() * d2c)
        if sigma:
            kernel = NoiseKernel(P.shape[-1] - 1, float(sigma))
            P, dP, d2P = kernel.apply(P), kernel.apply(dP), kernel.apply(d2P)
        return P, dP, d2P

    def final_state(self, phi: float) -> DickeState:
        vec = self.readout @ (np.exp(-1j * phi * self.gen_evals) * self.gen_coeffs)
        return DickeState.from_vector(vec)


@lru_cache(maxsize=512)
def _compile(spec: ProtocolSpec) -> _CompiledProtocol:
    N = spec.n_particles
    basis = resolve_basis(spec)
    g_axis = spec.generator.lower().removeprefix("j")
    if g_axis in AXES:
        evals, W = _eigensystem(N, g_axis)
    else:
        raise ValueError(f"unsupported generator {spec.generator!r}")
    coeffs = W.conj().T @ spec.entangled_state().amplitudes
    readout = np.array(W)
    for step in spec.u2_steps:
        readout = step.apply_matrix(readout)
    return _CompiledProtocol(basis, evals, coeffs, readout, basis.to_basis(readout))


@dataclass(frozen=True, eq=False)
class ProtocolEvaluation:
    final_state: DickeState
    distribution: OutcomeDistribution
    dP: np.ndarray


def evaluate_protocol(spec: ProtocolSpec, phi: float, sigma: float = 0.0) -> ProtocolEvaluation:
    """Final state, (noisy) outcome distribution and its analytic phase derivative."""
    compiled = _compile(spec)
    P, dP, _ = compiled.outcome_derivatives(np.array([phi], dtype=float), sigma)
    p = np.clip(P[0], 0, None)
    dist = OutcomeDistribution(p / p.sum(), sigma=float(sigma), basis_label=compiled.basis.label)
    return ProtocolEvaluation(compiled.final_state(phi), dist, dP[0])


# -- protocol families -------------------------------------------------------


def build_protocol(kind: str, N: int, chi_t1: float, chi_t2: float | None = None, *,
                   measurement_basis: str = "auto", signal: str | None = None) -> ProtocolSpec:
    """Stock protocols with U1 = U_OAT(chi_t1).

    ``chi_t2`` sets the readout strength for ``asymmetric`` (U2 = U_OAT(chi_t2)^dagger)
    and ``pseudo-forward`` (U2 = U_OAT(chi_t2)).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown protocol kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not chi_t1 >= 0 or (chi_t2 is not None and not chi_t2 >= 0):
        raise ValueError("twisting strengths must be non-negative")
    if kind in ("asymmetric", "pseudo-forward") and chi_t2 is None:
        raise ValueError(f"protocol {kind!r} requires chi_t2")
    u1 = oat_unitary_steps(N, chi_t1)
    if kind == "trivial":
        u2 = ()
    elif kind == "echo":
        u2 = inverse_steps(u1)
    elif kind == "pseudo-echo":
        u2 = u1
    elif kind == "asymmetric":
        u2 = inverse_steps(oat_unitary_steps(N, chi_t2))
    elif kind == "pseudo-forward":
        u2 = oat_unitary_steps(N, chi_t2)
    else:
        u2 = oat_unitary_steps(N, GHZ_CHI_T)
    return ProtocolSpec(N, u1, u2, measurement_basis=measurement_basis, signal=signal, kind=kind)


def pseudospin_readout_angle(spec: ProtocolSpec) -> float:
    """Angle beta such that, after exp(-i beta J_x), a J_z measurement reads the
    best linear signal cos(beta) J_z + sin(beta) J_y at phi = 0.

    The best signal b minimizes Var(b.J) / (d<b.J>/dphi)^2, so b is proportional
    to C^-1 g with C the (J_z, J_y) covariance and g the mean-spin slope.
    """
    N = spec.n_particles
    U2 = np.eye(N + 1, dtype=complex)
    for step in spec.u2_steps:
        U2 = step.apply_matrix(U2)
    psi1 = spec.entangled_state().amplitudes
    psi = U2 @ psi1
    dpsi = -1j * (U2 @ (spec.generator_operator().matrix @ psi1))
    ops = [make_collective_operator(N, a).matrix for a in "zy"]
    vecs = [A @ psi for A in ops]
    means = np.array([np.vdot(psi, v).real for v in vecs])
    C = np.array([[np.vdot(u, v).real for v in vecs] for u in vecs]) - np.outer(means, means)
    g = np.array([2 * np.vdot(v, dpsi).real for v in vecs])
    b = np.linalg.lstsq(C, g, rcond=1e-12)[0]
    if not np.any(b):
        return 0.0
    # b and -b give the same estimator
    beta = math.atan2(b[1], b[0])
    if beta > math.pi / 2:
        beta -= math.pi
    elif beta <= -math.pi / 2:
        beta += math.pi
    return float(beta)


def pseudospin_protocol(kind: str, N: int, chi_t1: float, chi_t2: float | None = None) -> ProtocolSpec:
    """Stock protocol read out by averaging the pseudospin J_z.

    The trivial protocol keeps the minimum-variance squeezing orientation of
    U_OAT.  Other kinds append a rotation about x that selects the best linear
    pseudospin signal transverse to the mean spin.
    """
    spec = build_protocol(kind, N, chi_t1, chi_t2, measurement_basis="z", signal="Jz")
    if kind == "trivial":
        return spec
    beta = pseudospin_readout_angle(spec)
    return replace(spec, u2_steps=spec.u2_steps + (rot("x", beta),))


def ghz_state(N: int) -> DickeState:
    """U_OAT(chi t = pi/2) applied to the x-coherent state."""
    if N < 2:
        raise ValueError("GHZ state needs N >= 2")
    state = coherent_state(N, "x")
    for step in oat_unitary_steps(N, GHZ_CHI_T):
        state = step.apply(state)
    return state


@dataclass(frozen=True)
class TimeBudget:
    T: float
    t1: float

    def __post_init__(self):
        if not (0 <= self.t1 <= self.T + 1e-12):
            raise ValueError(f"t1={self.t1} outside [0, T={self.T}]")

    @property
    def t2(self) -> float:
        return max(self.T - self.t1, 0.0)


def family_protocol(family: str, N: int, budget: TimeBudget) -> ProtocolSpec:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    kind = "asymmetric" if family == "asymmetric-reversed" else "pseudo-forward"
    return build_protocol(kind, N, budget.t1, budget.t2)


def default_t1_grid(T: float, points: int = 101) -> np.ndarray:
    grid = T * np.arange(points) / (points - 1)
    return np.unique(np.concatenate([grid, [T / 2, T]]))


@dataclass(frozen=True, eq=False)
class FixedTScan:
    T: float
    sigma: float
    family: str
    t1_grid: np.ndarray
    values: np.ndarray
    best_t1: float
    best_max_cfi: float


def fixed_T_scan(N: int, T: float, sigma: float, family: str, t1_grid=None,
                 phase_grid=None, tie_tol: float = 1e-6) -> FixedTScan:
    """Split a fixed twisting budget T = t1 + t2 between U1 and the readout.

    The endpoints t1 = T (no readout) and t1 = T/2 are always evaluated.  Ties
    within ``tie_tol`` (relative) resolve to the smallest t1.
    """
    if T < 0 or not math.isfinite(T):
        raise ValueError("T must be finite and >= 0")
    grid = default_t1_grid(T)
    if t1_grid is not None:
        extra = np.asarray(t1_grid, dtype=float)
        if np.any(extra < 0) or np.any(extra > T + 1e-12):
            raise ValueError("t1 grid must lie within [0, T]")
        grid = np.unique(np.concatenate([np.clip(extra, 0, T), [T / 2, T]]))
    values = np.array([
        max_cfi_over_phase(family_protocol(family, N, TimeBudget(T, t1)), sigma, phase_grid).max_value
        for t1 in grid
    ])
    best = values.max()
    i = int(np.flatnonzero(values >= best - tie_tol * abs(best))[0])
    return FixedTScan(T, sigma, family, grid, values, float(grid[i]), float(values[i]))
