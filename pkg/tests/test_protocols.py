import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from spinlab.estimation import max_cfi_over_phase, moment_values, qfi_pure
from spinlab.protocols import (
    FAMILIES,
    GHZ_CHI_T,
    KINDS,
    ProtocolSpec,
    Step,
    TimeBudget,
    build_protocol,
    default_t1_grid,
    evaluate_protocol,
    family_protocol,
    fixed_T_scan,
    ghz_state,
    inverse_steps,
    oat,
    pseudospin_protocol,
    pseudospin_readout_angle,
    rot,
    squeezing_angle,
)
from spinlab.spin import coherent_state, collective_basis, make_collective_operator, parity_check


def circular_gap(a, b, period=math.pi):
    d = abs(a - b) % period
    return min(d, period - d)


# -- steps -------------------------------------------------------------------

def test_step_validation_and_inverse():
    with pytest.raises(ValueError):
        Step("shear", 0.1)
    with pytest.raises(ValueError):
        Step("rotate", 0.1, "w")
    with pytest.raises(ValueError):
        oat(float("inf"))
    steps = (oat(0.3), rot("x", 0.7))
    inv = inverse_steps(steps)
    assert inv == (rot("x", -0.7), oat(-0.3))
    state = coherent_state(9)
    for s in steps + inv:
        state = s.apply(state)
    assert state.same_ray(coherent_state(9))


@given(st.integers(1, 10), st.sampled_from(["oat", "x", "y", "z"]), st.floats(-3, 3))
def test_step_apply_matches_expm(N, which, value):
    step = oat(value) if which == "oat" else rot(which, value)
    psi = coherent_state(N, "y")
    np.testing.assert_allclose(step.apply(psi).amplitudes,
                               oracles.step_unitary(N, step) @ psi.amplitudes, atol=1e-10)
    np.testing.assert_allclose(step.apply_matrix(np.eye(N + 1)), oracles.step_unitary(N, step), atol=1e-10)


# -- squeezing angle -----------------------------------------------------------

@pytest.mark.parametrize("N", [6, 20, 50])
@pytest.mark.parametrize("chi_t", [0.005, 0.05, 0.1, 0.3, 1.0])
def test_squeezing_angle_matches_dense_grid(N, chi_t):
    theta = squeezing_angle(N, chi_t)
    assert 0 <= theta < math.pi
    assert circular_gap(theta, oracles.squeezing_angle_grid(N, chi_t)) <= 2 * math.pi / 100_000


def test_squeezing_angle_degenerate_and_invalid():
    assert squeezing_angle(10, 0.0) == 0.0
    assert squeezing_angle(1, 0.4) == 0.0
    with pytest.raises(ValueError):
        squeezing_angle(10, -0.1)


@given(st.integers(2, 30), st.floats(0.001, 0.2))
def test_squeezed_state_has_reduced_jz_variance(N, chi_t):
    spec = build_protocol("trivial", N, chi_t)
    Jz = make_collective_operator(N, "z").matrix
    var = oracles.variance(spec.entangled_state().amplitudes, Jz)
    assert var <= N / 4 * (1 + 1e-9)


# -- dense pipeline oracle ---------------------------------------------------

@pytest.mark.parametrize("N", [6, 20])
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("phi", [0.0, 0.07, -0.4])
def test_final_state_matches_dense_pipeline(N, kind, phi):
    spec = build_protocol(kind, N, 0.15, 0.25)
    ref = oracles.final_state(N, spec.u1_steps, spec.u2_steps, phi)
    assert abs(np.vdot(ref, spec.final_state(phi).amplitudes)) == pytest.approx(1, abs=1e-10)
    axis = spec.basis.label[-1]
    for sigma in (0.0, 1.5):
        P = evaluate_protocol(spec, phi, sigma).distribution.probabilities
        np.testing.assert_allclose(P, oracles.probabilities(N, spec.u1_steps, spec.u2_steps, phi, axis, sigma),
                                   atol=1e-10)


@pytest.mark.parametrize("N", [6, 20])
@pytest.mark.parametrize("kind", ["trivial", "echo", "asymmetric", "ghz-readout"])
def test_outcome_derivative_matches_finite_difference(N, kind):
    spec = build_protocol(kind, N, 0.12, 0.2)
    phi, sigma = 0.031, 0.8
    axis = spec.basis.label[-1]
    for h, tol in ((1e-5, 1e-6), (1e-6, 1e-5)):
        fd = (oracles.probabilities(N, spec.u1_steps, spec.u2_steps, phi + h, axis, sigma)
              - oracles.probabilities(N, spec.u1_steps, spec.u2_steps, phi - h, axis, sigma)) / (2 * h)
        np.testing.assert_allclose(evaluate_protocol(spec, phi, sigma).dP, fd, atol=tol)


@pytest.mark.parametrize("kind", ["trivial", "echo", "pseudo-echo"])
def test_cfi_matches_finite_difference_oracle(kind):
    N = 12
    spec = build_protocol(kind, N, 0.2)
    phi = 0.05
    curve = max_cfi_over_phase(spec, 1.0, np.array([phi]))
    ref = oracles.cfi_finite_difference(N, spec.u1_steps, spec.u2_steps, phi, spec.basis.label[-1], 1.0)
    assert curve.values[0] == pytest.approx(ref, rel=1e-6)


# -- stock protocols -----------------------------------------------------------

@given(st.integers(2, 30), st.floats(0.0, 1.0))
def test_echo_returns_to_initial_state(N, chi_t):
    spec = build_protocol("echo", N, chi_t)
    assert spec.final_state(0.0).same_ray(coherent_state(N), tol=1e-9)


@given(st.integers(2, 30), st.floats(0.0, 1.0))
def test_pseudo_echo_applies_u1_twice(N, chi_t):
    spec = build_protocol("pseudo-echo", N, chi_t)
    assert spec.u2_steps == spec.u1_steps


@given(st.integers(2, 16))
def test_ghz_state_reaches_heisenberg_qfi(N):
    ghz = ghz_state(N)
    assert qfi_pure(ghz, make_collective_operator(N, "y")) == pytest.approx(N * N, rel=1e-8)
    assert parity_check(ghz, collective_basis(N, "x")).is_eigenstate


def test_ghz_state_is_cat_of_jy_extremes():
    N = 8
    ghz = ghz_state(N)
    up, down = coherent_state(N, "y", 1), coherent_state(N, "y", -1)
    weight = abs(ghz.overlap(up)) ** 2 + abs(ghz.overlap(down)) ** 2
    assert weight == pytest.approx(1, abs=1e-10)
    with pytest.raises(ValueError):
        ghz_state(1)


def test_build_protocol_validation():
    with pytest.raises(ValueError):
        build_protocol("loop", 10, 0.1)
    with pytest.raises(ValueError):
        build_protocol("echo", 10, -0.1)
    with pytest.raises(ValueError):
        build_protocol("asymmetric", 10, 0.1)
    with pytest.raises(TypeError):
        ProtocolSpec(4, ("oat",))


def test_protocol_specs_are_hashable_values():
    a = build_protocol("echo", 10, 0.1)
    b = build_protocol("echo", 10, 0.1)
    assert a == b and hash(a) == hash(b)
    assert a != build_protocol("echo", 10, 0.2)


def test_auto_basis_for_stock_protocols():
    for kind in KINDS:
        assert build_protocol(kind, 10, 0.1, 0.2).basis.label == "Jx"


# -- pseudospin readout ------------------------------------------------------

@pytest.mark.parametrize("chi_t", [0.05, 0.1, 0.2])
def test_pseudospin_readout_angle_is_best_linear_signal(chi_t):
    N = 40
    spec = build_protocol("echo", N, chi_t, measurement_basis="z", signal="Jz")
    Jz = make_collective_operator(N, "z")

    def n_dphi2(beta):
        s = ProtocolSpec(N, spec.u1_steps, spec.u2_steps + (rot("x", beta),), measurement_basis="z")
        return N * moment_values(s, Jz, [0.0])[0]

    betas = np.linspace(-math.pi / 2, math.pi / 2, 4001)
    brute = min(n_dphi2(b) for b in betas)
    assert n_dphi2(pseudospin_readout_angle(spec)) <= brute * (1 + 1e-9)


def test_pseudospin_protocol_trivial_keeps_squeezing_orientation():
    spec = pseudospin_protocol("trivial", 30, 0.1)
    assert spec.u2_steps == () and spec.basis.label == "Jz"
    assert pseudospin_protocol("echo", 30, 0.1).u2_steps[-1].axis == "x"


# -- fixed total twisting time -----------------------------------------------

def test_time_budget():
    b = TimeBudget(1.0, 0.25)
    assert b.t2 == 0.75
    with pytest.raises(ValueError):
        TimeBudget(1.0, 1.5)


def test_family_protocols():
    b = TimeBudget(0.3, 0.1)
    asym = family_protocol("asymmetric-reversed", 10, b)
    fwd = family_protocol("pseudo-forward", 10, b)
    assert asym.kind == "asymmetric" and fwd.kind == "pseudo-forward"
    assert asym.u2_steps == inverse_steps(fwd.u2_steps)
    with pytest.raises(ValueError):
        family_protocol("echo", 10, b)


def test_default_t1_grid_contains_endpoints():
    g = default_t1_grid(0.3, 10)
    assert 0.0 in g and 0.15 in g and 0.3 in g and np.all(np.diff(g) > 0)


@pytest.mark.parametrize("family", FAMILIES)
def test_fixed_T_scan_zero_noise_small_T(family):
    scan = fixed_T_scan(20, 0.05, 0.0, family, default_t1_grid(0.05, 11), np.linspace(-0.5, 0.5, 41))
    assert scan.best_t1 == pytest.approx(0.05)
    assert scan.best_max_cfi == pytest.approx(scan.values.max())


def test_fixed_T_scan_validation():
    with pytest.raises(ValueError):
        fixed_T_scan(10, -1.0, 0.0, "pseudo-forward")
    with pytest.raises(ValueError):
        fixed_T_scan(10, 0.1, 0.0, "pseudo-forward", t1_grid=[0.5])


def test_ghz_chi_t_constant():
    assert GHZ_CHI_T == math.pi / 2
