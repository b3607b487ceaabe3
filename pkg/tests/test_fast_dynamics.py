# File: tests/test_fast_dynamics.py
import math

import numpy as np
import pytest

from services.fast_dynamics import (
    FastState,
    boundary_point,
    eigen_normal,
    fast_field,
    fast_linearization,
    integrals,
    integrate_layer,
    layer_concentrations,
    manifold_membership,
    slow_field,
    tail_decay_rate,
)
from services.geometry import ChannelProfile
from services.problem import BoundaryData, IonSpecies, SteadyProblem
from services.steady_asymptotics import boundary_layer_endpoint, limiting_fluxes
from utils.errors import BadParameters, NonHyperbolic


@pytest.fixture
def left_layer_problem(unit_species):
    return SteadyProblem(ChannelProfile.constant(1.0), unit_species, BoundaryData(0.0, 4.0, 1.0, 2.0, 2.0))


def test_equilibria_are_fixed_points(unit_species):
    state = FastState(0.3, 0.0, 0.0, 2.0, 0.5, -0.2, 0.4)
    np.testing.assert_array_equal(fast_field(state, ChannelProfile.constant(1.0), unit_species).as_array(), 0.0)
    assert state.on_slow_manifold


def test_slow_field_rescales_fast_field(unit_species):
    profile = ChannelProfile.affine(1.0, 0.5)
    state = FastState(0.1, 0.2, -0.3, 2.0, 0.4, 0.1, 0.5)
    mu = 0.05
    np.testing.assert_allclose(slow_field(state, profile, unit_species, mu).as_array(),
                               fast_field(state, profile, unit_species, mu).as_array() / mu)
    assert slow_field(state, profile, unit_species, mu).tau == pytest.approx(1.0)
    with pytest.raises(BadParameters):
        slow_field(state, profile, unit_species, 0.0)


def test_layer_concentrations_invert_v_and_w():
    species = IonSpecies(2.0, 1.0)
    c1, c2, h = 0.7, 1.9, 1.3
    v = -h * (species.alpha1 * c1 - species.alpha2 * c2)
    w = species.alpha1**2 * c1 + species.alpha2**2 * c2
    assert layer_concentrations(v, w, h, species) == pytest.approx((c1, c2))


def test_boundary_point(left_layer_problem):
    point = boundary_point(left_layer_problem.boundary, left_layer_problem.profile,
                           left_layer_problem.species, "right", 0.0, -1.0, 1.0)
    assert point.side == "right"
    assert point.state.tau == 1.0
    assert point.state.phi == 0.0
    assert point.state.v == 0.0
    assert point.state.w == pytest.approx(4.0)


def test_eigen_normal_spectrum():
    species = IonSpecies(1.0, 3.0)
    profile = ChannelProfile.constant(2.0)
    equilibrium = FastState(0.0, 0.0, 0.0, 2.25, tau=0.5)
    eig = eigen_normal(equilibrium, species, profile)
    assert eig.lambda_plus == pytest.approx(1.5)
    assert eig.lambda_minus == pytest.approx(-1.5)
    L = fast_linearization(equilibrium, species, profile)
    np.testing.assert_allclose(L @ eig.n_plus, eig.lambda_plus * eig.n_plus, atol=1e-14)
    np.testing.assert_allclose(L @ eig.n_minus, eig.lambda_minus * eig.n_minus, atol=1e-14)


def test_eigen_normal_errors(unit_species):
    with pytest.raises(NonHyperbolic):
        eigen_normal(FastState(0.0, 0.0, 0.0, 0.0), unit_species)
    with pytest.raises(BadParameters):
        eigen_normal(FastState(0.0, 0.1, 0.0, 1.0), unit_species)


def test_eigenvectors_against_finite_differences():
    species = IonSpecies(2.0, 1.0)
    profile = ChannelProfile.constant(0.8)
    equilibrium = FastState(0.2, 0.0, 0.0, 3.0, 0.4, -0.1, 0.5)
    base = equilibrium.as_array()
    step = 1e-6
    jac = np.empty((7, 7))
    for j in range(7):
        e = np.zeros(7)
        e[j] = step
        plus = fast_field(FastState.from_array(base + e), profile, species).as_array()
        minus = fast_field(FastState.from_array(base - e), profile, species).as_array()
        jac[:, j] = (plus - minus) / (2 * step)
    eig = eigen_normal(equilibrium, species, profile)
    for lam, n in ((eig.lambda_plus, eig.n_plus), (eig.lambda_minus, eig.n_minus)):
        assert np.linalg.norm(jac @ n - lam * n) <= 1e-6 * np.linalg.norm(lam * n)


def test_left_layer_lands_on_equilibrium(left_layer_problem):
    orbit = integrate_layer(left_layer_problem, "left")
    np.testing.assert_allclose(orbit.terminal.as_array()[:4], [math.log(2.0), 0.0, 0.0, 4.0], atol=1e-6)
    assert np.max(orbit.drift) < 1e-8
    assert tail_decay_rate(orbit) == pytest.approx(-2.0, rel=0.05)
    assert orbit.has_layer
    assert np.all(np.diff(orbit.xi) > 0)


def test_right_layer_lands_on_equilibrium(unit_species):
    problem = SteadyProblem(ChannelProfile.constant(1.0), unit_species, BoundaryData(0.0, 2.0, 2.0, 1.0, 4.0))
    orbit = integrate_layer(problem, "right")
    np.testing.assert_allclose(orbit.terminal.as_array()[:4], [-math.log(2.0), 0.0, 0.0, 4.0], atol=1e-6)
    assert np.all(orbit.xi <= 0)
    assert np.max(orbit.drift) < 1e-8


def test_electroneutral_side_has_no_layer(left_layer_problem):
    orbit = integrate_layer(left_layer_problem, "right")
    assert not orbit.has_layer
    np.testing.assert_array_equal(orbit.at_distance([0.0, 1e3]), orbit.states[[0, -1]])


def test_layer_orbit_stays_on_level_set(left_layer_problem):
    orbit = integrate_layer(left_layer_problem, "left")
    profile, species = left_layer_problem.profile, left_layer_problem.species
    start = integrals(FastState.from_array(orbit.states[0]), profile, species).as_array()
    for row in orbit.states[::25]:
        assert manifold_membership(FastState.from_array(row), orbit.landing, profile, species)
        np.testing.assert_allclose(integrals(FastState.from_array(row), profile, species).as_array(), start,
                                   atol=1e-8)
    off = FastState.from_array(orbit.states[5] + np.array([0.0, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0]))
    assert not manifold_membership(off, orbit.landing, profile, species)


def test_layer_start_matches_boundary_manifold(left_layer_problem):
    orbit = integrate_layer(left_layer_problem, "left")
    endpoint = boundary_layer_endpoint(left_layer_problem, "left")
    fluxes = limiting_fluxes(left_layer_problem)
    expected = boundary_point(left_layer_problem.boundary, left_layer_problem.profile,
                              left_layer_problem.species, "left", endpoint.u_amplitude,
                              fluxes.J1, fluxes.J2).state
    np.testing.assert_array_equal(orbit.states[0], expected.as_array())


def test_integrate_layer_rejects_unknown_side(left_layer_problem):
    with pytest.raises(BadParameters):
        integrate_layer(left_layer_problem, "middle")


def test_fast_field_hand_examples(unit_species):
    profile = ChannelProfile.constant(1.0)
    state = FastState(0.0, 1.0, 0.0, 2.0)
    rate = fast_field(state, profile, unit_species)
    assert (rate.phi, rate.u, rate.v, rate.w) == (1.0, 0.0, 2.0, 0.0)
    driven = fast_field(FastState(0.0, 1.0, 0.0, 2.0, 1.0, 1.0), profile, unit_species, mu=0.1)
    assert driven.v == pytest.approx(2.0)
    assert driven.w == pytest.approx(-0.2)
    assert driven.tau == 0.1


def test_integrals_hand_example(unit_species):
    values = integrals(FastState(0.0, 1.0, 0.0, 2.0), ChannelProfile.constant(1.0), unit_species)
    assert values.H1 == pytest.approx(1.5)
    assert values.H2 == pytest.approx(-math.log(2.0))
    assert values.H3 == pytest.approx(math.log(2.0))


def test_eigen_normal_without_profile():
    species = IonSpecies(1.0, 2.0)
    eig = eigen_normal(FastState(0.0, 0.0, 0.0, 1.0), species)
    np.testing.assert_allclose(eig.n_plus, [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    wide = eigen_normal(FastState(0.0, 0.0, 0.0, 4.0), species)
    assert (wide.lambda_plus, wide.lambda_minus) == (2.0, -2.0)


def test_boundary_point_hand_examples(left_layer_problem):
    problem = left_layer_problem
    left = boundary_point(problem.boundary, problem.profile, problem.species, "left", math.sqrt(2.0), 0.3, -0.2)
    assert left.state.as_array() == pytest.approx([0.0, math.sqrt(2.0), -3.0, 5.0, 0.3, -0.2, 0.0])
    right = boundary_point(problem.boundary, problem.profile, problem.species, "right", 0.7, 0.3, -0.2)
    assert right.state.as_array() == pytest.approx([0.0, 0.7, 0.0, 4.0, 0.3, -0.2, 1.0])
