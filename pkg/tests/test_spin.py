import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

import oracles
from spinlab.spin import (
    CollectiveOperator,
    DickeState,
    OutcomeDistribution,
    coherent_state,
    collective_basis,
    expectation_and_variance,
    generator_conserves_parity,
    generator_flips_parity,
    make_collective_operator,
    measurement_distribution,
    oat_phase,
    parity_check,
    rotate,
    rotation_matrix,
)

small_n = st.integers(min_value=1, max_value=14)
axes = st.sampled_from("xyz")
angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)


def random_state(N, seed):
    rng = np.random.default_rng(seed)
    return DickeState.from_vector(rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1))


@given(small_n)
def test_spin_matrices_match_explicit_elements(N):
    ref = oracles.spin_matrices(N)
    for a in "xyz":
        np.testing.assert_allclose(make_collective_operator(N, a).matrix, ref[a], atol=1e-13)


@given(small_n)
def test_su2_commutation_and_casimir(N):
    J = {a: make_collective_operator(N, a).matrix for a in "xyz"}
    np.testing.assert_allclose(J["x"] @ J["y"] - J["y"] @ J["x"], 1j * J["z"], atol=1e-11)
    casimir = sum(M @ M for M in J.values())
    np.testing.assert_allclose(casimir, (N / 2) * (N / 2 + 1) * np.eye(N + 1), atol=1e-10)


def test_css_n6_binomial_amplitudes():
    css = coherent_state(6, "x")
    expected = np.sqrt([1, 6, 15, 20, 15, 6, 1]) / 8
    assert css.same_ray(DickeState(6, expected.astype(complex)))


@given(st.integers(min_value=1, max_value=60))
def test_css_matches_product_state(N):
    assert coherent_state(N, "x").same_ray(DickeState(N, oracles.binomial_css(N)), tol=1e-10)


@given(small_n, axes, st.sampled_from([1, -1]))
def test_css_is_extremal_eigenvector(N, axis, sign):
    css = coherent_state(N, axis, sign)
    mean, var = expectation_and_variance(css, make_collective_operator(N, axis))
    assert mean == pytest.approx(sign * N / 2, abs=1e-10)
    assert var == pytest.approx(0, abs=1e-10)


@given(st.integers(min_value=1, max_value=40))
def test_css_transverse_variance_is_n_over_4(N):
    _, var = expectation_and_variance(coherent_state(N, "x"), make_collective_operator(N, "y"))
    assert var == pytest.approx(N / 4, rel=1e-12)


@given(small_n, axes, angles)
def test_rotation_matches_expm(N, axis, angle):
    ref = expm(-1j * angle * oracles.spin_matrices(N)[axis])
    np.testing.assert_allclose(rotation_matrix(N, axis, angle), ref, atol=1e-10)


@given(small_n, axes, angles, st.integers(0, 2**32 - 1))
def test_rotate_is_unitary_action(N, axis, angle, seed):
    psi = random_state(N, seed)
    out = rotate(psi, axis, angle)
    np.testing.assert_allclose(out.amplitudes, rotation_matrix(N, axis, angle) @ psi.amplitudes, atol=1e-10)
    assert rotate(out, axis, -angle).same_ray(psi)


@given(small_n, st.floats(min_value=0, max_value=4, allow_nan=False), st.integers(0, 2**32 - 1))
def test_oat_matches_expm(N, chi_t, seed):
    psi = random_state(N, seed)
    Jz = oracles.spin_matrices(N)["z"]
    np.testing.assert_allclose(oat_phase(psi, chi_t).amplitudes,
                               expm(-1j * chi_t * Jz @ Jz) @ psi.amplitudes, atol=1e-10)


@given(small_n, axes)
def test_basis_eigenvalues_on_integer_lattice(N, axis):
    B = collective_basis(N, axis)
    V = B.eigenvectors
    diag = V.conj().T @ B.basis_operator.matrix @ V
    np.testing.assert_allclose(diag, np.diag(np.arange(N + 1) - N / 2), atol=1e-10)


@given(small_n, axes, st.integers(0, 2**32 - 1))
def test_distribution_is_normalized(N, axis, seed):
    dist = measurement_distribution(random_state(N, seed), collective_basis(N, axis))
    assert dist.probabilities.min() >= 0
    assert dist.probabilities.sum() == pytest.approx(1, abs=1e-12)
    assert dist.basis_label == "J" + axis


def test_distribution_moments_follow_operator():
    N = 9
    psi = random_state(N, 3)
    for axis in "xyz":
        dist = measurement_distribution(psi, collective_basis(N, axis))
        mean, var = expectation_and_variance(psi, make_collective_operator(N, axis))
        assert dist.moments() == pytest.approx((mean, var), abs=1e-10)


@given(st.integers(min_value=1, max_value=20))
def test_jy_flips_and_jx_conserves_parity_in_jx_basis(N):
    B = collective_basis(N, "x")
    assert generator_flips_parity(make_collective_operator(N, "y"), B)
    assert generator_flips_parity(make_collective_operator(N, "z"), B)
    assert generator_conserves_parity(make_collective_operator(N, "x"), B)
    assert not generator_flips_parity(make_collective_operator(N, "x"), B)


@given(st.integers(min_value=1, max_value=20), st.floats(0, 3))
def test_twisted_css_keeps_jx_parity(N, chi_t):
    state = oat_phase(coherent_state(N, "x"), chi_t)
    res = parity_check(state, collective_basis(N, "x"))
    assert res.is_eigenstate and res.p in (0, 1)


def test_parity_offset_flips_label():
    N = 4
    state = coherent_state(N, "x")
    assert parity_check(state, collective_basis(N, "x")).p == 0
    assert parity_check(state, collective_basis(N, "x", 1)).p == 1


def test_generic_state_is_not_parity_eigenstate():
    assert not parity_check(random_state(6, 0), collective_basis(6, "x")).is_eigenstate


def test_validation_errors():
    with pytest.raises(ValueError):
        DickeState(2, np.array([1, 1, 0], dtype=complex))
    with pytest.raises(ValueError):
        DickeState(2, np.array([1, 0], dtype=complex))
    with pytest.raises(ValueError):
        make_collective_operator(0, "x")
    with pytest.raises(ValueError):
        make_collective_operator(3, "w")
    with pytest.raises(ValueError):
        CollectiveOperator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        OutcomeDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        OutcomeDistribution(np.array([1.1, -0.1]))
    with pytest.raises(ValueError):
        parity_check(coherent_state(3), collective_basis(3, "x"), tol=0)
    with pytest.raises(ValueError):
        measurement_distribution(coherent_state(3), collective_basis(4, "x"))


def test_axis_labels_accept_j_prefix():
    assert make_collective_operator(5, "Jz").label == "Jz"
    assert collective_basis(5, "Jy").label == "Jy"


def test_operator_algebra():
    N = 3
    G = 0.5 * make_collective_operator(N, "y") + make_collective_operator(N, "z")
    np.testing.assert_allclose(G.matrix, 0.5 * oracles.spin_matrices(N)["y"] + oracles.spin_matrices(N)["z"])
    assert G.n_particles == N
