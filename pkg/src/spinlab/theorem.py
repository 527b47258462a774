"""Randomized check that F_C(0) = 4 Var(G) whenever the input is a parity
eigenstate of the measurement basis and G flips that parity, plus the
falsification cases where either condition is broken."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import cfi_from_distribution_pair, phase_derivatives, qfi_pure
from .spin import (
    AXES,
    CollectiveOperator,
    DickeState,
    collective_basis,
    make_collective_operator,
    oat_phases,
    rotation_matrix,
)

# case kinds
THEOREM, BROKEN_STATE, BROKEN_GENERATOR = 0, 1, 2
KIND_NAMES = {THEOREM: "theorem", BROKEN_STATE: "non-parity-input", BROKEN_GENERATOR: "parity-conserving-generator"}


@dataclass(frozen=True)
class TheoremCase:
    index: int
    kind: int
    n_particles: int
    basis_axis: str
    parity: int
    fc0: float
    four_var: float

    @property
    def relative_gap(self) -> float:
        """(4 Var(G) - F_C(0)) / 4 Var(G)."""
        return (self.four_var - self.fc0) / self.four_var


def case_rng(seed: int, index: int, kind: int) -> np.random.Generator:
    """Independent, reproducible stream for one case."""
    return np.random.default_rng([seed, kind, index])


def _random_hermitian(rng, dim: int) -> np.ndarray:
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (A + A.conj().T) / 2


def _random_generator(rng, N: int, axis: str, signs: np.ndarray, flips: bool) -> CollectiveOperator:
    """Random generator that flips (or conserves) parity in the J_axis basis."""
    basis = collective_basis(N, axis)
    V = basis.eigenvectors
    if rng.random() < 0.5:
        if flips:
            others = [a for a in AXES if a != axis]
            w = rng.normal(size=2)
            G = sum(wi * make_collective_operator(N, a).matrix for wi, a in zip(w, others))
        else:
            G = rng.normal() * make_collective_operator(N, axis).matrix
            G = G + V @ _block(_random_hermitian(rng, N + 1), signs, flips=False) @ V.conj().T
        return CollectiveOperator(G)
    H = _block(_random_hermitian(rng, N + 1), signs, flips)
    return CollectiveOperator(V @ H @ V.conj().T)


def _block(H: np.ndarray, signs: np.ndarray, flips: bool) -> np.ndarray:
    same = signs[:, None] == signs[None, :]
    return np.where(same != flips, H, 0)


def _random_readout(rng, N: int, axis: str) -> np.ndarray:
    """Random unitary built from twisting and rotation about the basis axis; conserves parity."""
    U = np.diag(oat_phases(N, rng.uniform(-np.pi, np.pi)))
    U = rotation_matrix(N, axis, rng.uniform(-np.pi, np.pi)) @ U
    return np.diag(oat_phases(N, rng.uniform(-np.pi, np.pi))) @ U


def run_case(seed: int, index: int, kind: int = THEOREM, max_n: int = 12) -> TheoremCase:
    rng = case_rng(seed, index, kind)
    while True:
        N = int(rng.integers(2, max_n + 1))
        axis = AXES[int(rng.integers(3))]
        basis = collective_basis(N, axis)
        signs = basis.parity_signs
        p = int(rng.integers(2))
        coeffs = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
        if kind != BROKEN_STATE:
            coeffs = np.where(signs == (1 if p == 0 else -1), coeffs, 0)
        state = DickeState.from_vector(basis.eigenvectors @ coeffs)
        G = _random_generator(rng, N, axis, signs, flips=kind != BROKEN_GENERATOR)
        four_var = qfi_pure(state, G)
        # a state that is an eigenvector of G carries no phase information; redraw
        if four_var > 1e-9:
            break
    readout = _random_readout(rng, N, axis) if rng.random() < 0.5 else None
    P, dP, d2P = phase_derivatives(state, G, basis, readout)
    fc0 = cfi_from_distribution_pair(P, dP, d2P)
    return TheoremCase(index, kind, N, axis, p if kind != BROKEN_STATE else -1, fc0, four_var)


@dataclass(frozen=True)
class TheoremReport:
    cases: tuple
    max_relative_deviation: float
    falsified_fraction: dict
    tolerance: float
    falsification_gap: float
    falsification_quota: float

    @property
    def violations(self) -> list:
        return [c for c in self.cases
                if c.kind == THEOREM and abs(c.relative_gap) > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.violations and all(
            f >= self.falsification_quota for f in self.falsified_fraction.values())


def verify_theorem(seed: int, n_cases: int = 200, max_n: int = 12, n_falsify: int | None = None,
                   tolerance: float = 1e-8, falsification_gap: float = 1e-3,
                   falsification_quota: float = 0.9) -> TheoremReport:
    n_falsify = n_cases if n_falsify is None else n_falsify
    cases = [run_case(seed, i, THEOREM, max_n) for i in range(n_cases)]
    fractions = {}
    for kind in (BROKEN_STATE, BROKEN_GENERATOR):
        broken = [run_case(seed, i, kind, max_n) for i in range(n_falsify)]
        cases += broken
        hits = sum(c.relative_gap > falsification_gap for c in broken)
        fractions[KIND_NAMES[kind]] = hits / max(len(broken), 1)
    devs = [abs(c.relative_gap) for c in cases if c.kind == THEOREM]
    return TheoremReport(tuple(cases), max(devs, default=0.0), fractions,
                         tolerance, falsification_gap, falsification_quota)
