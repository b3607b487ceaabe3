# File: tests/test_finite_volume.py
import numpy as np
import pytest

from services.finite_volume import (
    CellGeometry,
    MassTerm,
    PnpSystem,
    bernoulli,
    bernoulli_dot,
    newton_solve,
    sg_flux,
)
from services.geometry import ChannelProfile, geometry_factor
from services.problem import BoundaryData, IonSpecies


def test_bernoulli_values():
    assert bernoulli(0.0) == 1.0
    x = np.array([-30.0, -1.0, -1e-6, 1e-6, 0.5, 40.0])
    np.testing.assert_allclose(bernoulli(x) - bernoulli(-x), -x, rtol=1e-12, atol=1e-14)
    near = 0.999e-5
    assert bernoulli(near) == pytest.approx(near / np.expm1(near), rel=1e-14)


def test_bernoulli_dot_matches_finite_difference():
    for x in (-3.0, -1e-3, 1e-6, 0.7, 5.0):
        step = 1e-6
        fd = (bernoulli(x + step) - bernoulli(x - step)) / (2 * step)
        assert bernoulli_dot(x) == pytest.approx(fd, rel=1e-6, abs=1e-9)
    assert bernoulli_dot(0.0) == -0.5


def test_cell_geometry_totals():
    profile = ChannelProfile.affine(1.0, 1.0)
    nodes = np.linspace(0.0, 1.0, 21) ** 1.5
    geometry = CellGeometry.build(nodes, profile)
    summary = geometry_factor(profile)
    assert geometry.resistance.sum() == pytest.approx(summary.rho0, rel=1e-12)
    assert geometry.dual_volume.size == nodes.size - 2
    # volumes duais mais as meias células das pontas cobrem o canal
    assert geometry.dual_volume.sum() < summary.volume_integral


def test_sg_flux_limits():
    R = np.full(4, 0.25)
    c = np.array([1.0, 1.25, 1.5, 1.75, 2.0])
    np.testing.assert_allclose(sg_flux(c, np.zeros(5), 1.0, R), -1.0, rtol=1e-14)
    constant = np.full(5, 2.0)
    phi = np.linspace(1.0, 0.0, 5)
    np.testing.assert_allclose(sg_flux(constant, phi, 1.0, R), 2.0 * 0.25 / 0.25, rtol=1e-12)


@pytest.mark.parametrize("with_mass", [False, True])
def test_jacobian_matches_finite_differences(with_mass):
    profile = ChannelProfile.bump(1.0, 0.4, 0.3)
    nodes = np.linspace(0.0, 1.0, 13)
    geometry = CellGeometry.build(nodes, profile)
    species = IonSpecies(1.0, 2.0)
    boundary = BoundaryData(0.7, 2.0, 1.5, 1.0, 0.8)
    mass = None
    if with_mass:
        prev = np.full(11, 1.2)
        mass = MassTerm(geometry.dual_volume / 0.01, geometry.dual_volume / 0.02, prev, prev)
    system = PnpSystem(geometry, species, boundary, 0.2, mass)
    rng = np.random.default_rng(5)
    phi = rng.uniform(-1, 1, 13)
    c1 = rng.uniform(0.5, 2.0, 13)
    c2 = rng.uniform(0.5, 2.0, 13)
    x = system.pack(phi, c1, c2)
    jac = system.jacobian(x).toarray()
    step = 1e-6
    fd = np.empty_like(jac)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        fd[:, j] = (system.residual(x + e)[0] - system.residual(x - e)[0]) / (2 * step)
    np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-6)


def test_pack_and_expand_pin_boundary_values():
    geometry = CellGeometry.build(np.linspace(0.0, 1.0, 6), ChannelProfile.constant(1.0))
    boundary = BoundaryData(0.3, 1.0, 2.0, 3.0, 4.0)
    system = PnpSystem(geometry, IonSpecies(), boundary, 0.1)
    phi, c1, c2 = system.expand(np.arange(12, dtype=float))
    assert (phi[0], phi[-1], c1[0], c1[-1], c2[0], c2[-1]) == (0.3, 0.0, 1.0, 3.0, 2.0, 4.0)
    np.testing.assert_array_equal(phi[1:-1], [0.0, 3.0, 6.0, 9.0])
    assert system.concentration_mask().sum() == 8


def test_newton_solves_electroneutral_problem():
    nodes = np.linspace(0.0, 1.0, 41)
    geometry = CellGeometry.build(nodes, ChannelProfile.constant(1.0))
    system = PnpSystem(geometry, IonSpecies(), BoundaryData(0.0, 1.0, 1.0, 2.0, 2.0), 0.1)
    x0 = system.pack(np.zeros(41), np.full(41, 1.5), np.full(41, 1.5))
    x, residual, iterations = newton_solve(system, x0)
    phi, c1, c2 = system.expand(x)
    assert residual <= 1e-10
    assert iterations <= 50
    np.testing.assert_allclose(c1, 1.0 + nodes, atol=1e-9)
    np.testing.assert_allclose(phi, 0.0, atol=1e-9)
