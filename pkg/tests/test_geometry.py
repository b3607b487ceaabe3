# File: tests/test_geometry.py
import math

import numpy as np
import pytest

from services.geometry import (
    ChannelProfile,
    Foliation,
    WallFunction,
    build_foliation,
    cell_integrals,
    eval_h,
    geometry_factor,
    inverse_area_integral,
    jacobian_products,
    normalize_volume,
    wall_normal_derivative,
)
from utils.errors import DegenerateGeometry, InvalidProfile, OutOfDomain


def test_constant_and_affine_rho0():
    assert geometry_factor(ChannelProfile.constant(2.0)).rho0 == pytest.approx(0.5, rel=1e-12)
    summary = geometry_factor(ChannelProfile.affine(1.0, 1.0))
    assert summary.rho0 == pytest.approx(math.log(2.0), rel=1e-12)
    assert summary.volume_integral == pytest.approx(1.5, rel=1e-12)


def test_h_rejects_points_outside_unit_interval():
    profile = ChannelProfile.constant(1.0)
    with pytest.raises(OutOfDomain):
        profile.h(1.5)
    with pytest.raises(OutOfDomain):
        profile.h(np.array([0.2, -0.1]))
    assert profile.h(0.3) == 1.0


@pytest.mark.parametrize("factory", [
    lambda: ChannelProfile.constant(-1.0),
    lambda: ChannelProfile.affine(1.0, -1.0),
    lambda: ChannelProfile.bump(1.0, 0.5, 0.0),
    lambda: ChannelProfile.bump(0.5, -0.6, 0.2),
    lambda: ChannelProfile.sampled([0.0, 0.5], [1.0, 1.0]),
    lambda: ChannelProfile.sampled([0.0, 0.6, 0.4, 1.0], [1.0, 1.0, 1.0, 1.0]),
    lambda: ChannelProfile.sampled([0.0, 1.0], [1.0, 0.0]),
])
def test_invalid_profiles(factory):
    with pytest.raises(InvalidProfile):
        factory()


def test_bump_shape_and_derivative():
    profile = ChannelProfile.bump(1.0, 0.5, 0.2, 0.4)
    assert profile.h(0.4) == pytest.approx(1.5)
    x, step = 0.55, 1e-6
    fd = (profile.h(x + step) - profile.h(x - step)) / (2 * step)
    assert profile.dh(x) == pytest.approx(fd, rel=1e-7)


def test_sampled_profile_interpolates_nodes():
    nodes = [0.0, 0.25, 0.5, 1.0]
    values = [1.0, 1.4, 0.8, 1.2]
    profile = ChannelProfile.sampled(nodes, values)
    np.testing.assert_allclose(profile.h(np.array(nodes)), values, rtol=1e-14)
    assert geometry_factor(profile).rho0 > 0


def test_profile_dict_round_trip():
    for profile in (ChannelProfile.constant(1.3), ChannelProfile.affine(1.0, 0.5),
                    ChannelProfile.bump(1.0, 0.5, 0.2, 0.3), ChannelProfile.sampled([0.0, 1.0], [1.0, 2.0])):
        assert ChannelProfile.from_dict(profile.to_dict()) == profile


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(InvalidProfile, match="width"):
        ChannelProfile.from_dict({"kind": "constant", "value": 1.0, "width": 2.0})
    with pytest.raises(InvalidProfile):
        ChannelProfile.from_dict({"kind": "cone"})
    with pytest.raises(InvalidProfile):
        ChannelProfile.from_dict({"kind": "affine", "a": 1.0})


def test_inverse_area_integral_matches_closed_form():
    profile = ChannelProfile.affine(1.0, 2.0)
    x = np.array([0.9, 0.1, 0.5, 0.0, 1.0])
    expected = np.log1p(2.0 * x) / 2.0
    np.testing.assert_allclose(inverse_area_integral(profile, x), expected, rtol=1e-12, atol=1e-15)
    assert inverse_area_integral(profile, 1.0) == pytest.approx(geometry_factor(profile).rho0, rel=1e-11)


def test_cell_integrals_add_up():
    profile = ChannelProfile.bump(1.0, 0.5, 0.2)
    nodes = np.linspace(0.0, 1.0, 101)
    resistance, volume = cell_integrals(profile, nodes)
    summary = geometry_factor(profile)
    assert resistance.sum() == pytest.approx(summary.rho0, rel=1e-10)
    assert volume.sum() == pytest.approx(summary.volume_integral, rel=1e-10)


def test_normalize_volume():
    profile = normalize_volume(ChannelProfile.bump(0.5, 1.0, 0.1))
    summary = geometry_factor(profile)
    assert summary.volume_integral == pytest.approx(1.0, rel=1e-10)
    assert summary.rho0 >= 1.0 - 1e-10


def test_jacobian_products_example():
    result = jacobian_products(2.0, 1.0, 1.0, 0.0)
    assert result.JJt[0, 0] == pytest.approx(1.0)
    assert result.JJt[0, 1] == pytest.approx(-0.5)
    assert result.det_J_inv == pytest.approx(4.0, rel=1e-14)
    np.testing.assert_allclose(result.J @ result.J_inv, np.eye(3), atol=1e-14)


def test_jacobian_products_random_determinant():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        g = rng.uniform(0.1, 3.0)
        result = jacobian_products(g, rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-1, 1))
        assert abs(result.det_J_inv - g * g) <= 1e-13 * g * g


def test_jacobian_products_degenerate():
    with pytest.raises(DegenerateGeometry):
        jacobian_products(0.0, 1.0, 0.5, 0.5)


def test_wall_function_checks():
    with pytest.raises(InvalidProfile):
        WallFunction.cosine(0.0)
    with pytest.raises(InvalidProfile):
        WallFunction(g=lambda X, e: e * (1.0 + 0.3 * X), g_x=lambda X, e: 0.3 * e, eps=0.1)
    wall = WallFunction.cosine(0.1)
    assert wall.radius(0.5) == pytest.approx(0.13)
    assert wall.slope(0.0) == pytest.approx(0.0, abs=1e-15)


def test_foliation_on_axis_is_boundary_profile():
    h_boundary = lambda X: 1.0 + X**2  # noqa: E731
    foliation = build_foliation(h_boundary, WallFunction.cosine(0.1))
    assert isinstance(foliation, Foliation)
    assert foliation(0.3, 0.0, 0.0) == pytest.approx(h_boundary(0.3))
    assert foliation(0.0, 0.05, 0.05) == pytest.approx(h_boundary(0.0))
    with pytest.raises(OutOfDomain):
        foliation(1.2, 0.0, 0.0)


@pytest.mark.parametrize("X", [0.2, 0.5, 0.7])
@pytest.mark.parametrize("theta", [0.0, 1.3])
def test_foliation_normal_derivative_vanishes_at_wall(X, theta):
    foliation = build_foliation(lambda s: 1.0 + 0.5 * math.sin(math.pi * s) ** 2, WallFunction.cosine(0.1))
    assert abs(wall_normal_derivative(foliation, X, theta)) < 1e-5


def test_eval_h_examples():
    assert eval_h(ChannelProfile.constant(1.0), 0.37) == 1.0
    assert eval_h(ChannelProfile.affine(1.0, 1.0), 0.5) == pytest.approx(1.5, rel=1e-14)
    nodes = np.linspace(0.0, 1.0, 11)
    sampled = ChannelProfile.sampled(nodes, 1.0 + nodes)
    assert eval_h(sampled, 0.25) == pytest.approx(1.25, abs=1e-6)
    np.testing.assert_allclose(eval_h(sampled, nodes), 1.0 + nodes, rtol=1e-14)
    assert geometry_factor(sampled).rho0 == pytest.approx(math.log(2.0), abs=1e-5)


def test_normalize_volume_examples():
    assert normalize_volume(ChannelProfile.constant(4.0)).params == pytest.approx((1.0,), rel=1e-12)
    affine = normalize_volume(ChannelProfile.affine(1.0, 1.0))
    assert affine.kind == "affine"
    assert affine.params == pytest.approx((2.0 / 3.0, 2.0 / 3.0), rel=1e-12)
    np.testing.assert_allclose(normalize_volume(affine).params, affine.params, rtol=1e-12)
    once = normalize_volume(ChannelProfile.bump(1.0, 0.5, 0.2, 0.4))
    np.testing.assert_allclose(normalize_volume(once).params, once.params, rtol=1e-10)


def test_foliation_with_straight_wall_is_axial():
    wall = WallFunction(g=lambda X, e: e, g_x=lambda X, e: 0.0, eps=0.1)
    h_boundary = lambda X: 1.0 + 0.5 * X  # noqa: E731
    foliation = build_foliation(h_boundary, wall)
    for X in (0.1, 0.45, 0.9):
        assert foliation(X, 0.03, 0.03) == pytest.approx(h_boundary(X), rel=1e-12)


@pytest.mark.parametrize("X", [0.3, 0.6])
def test_foliation_depends_only_on_radius(X):
    foliation = build_foliation(lambda s: 1.0 + 0.5 * math.sin(math.pi * s) ** 2, WallFunction.cosine(0.1))
    reference = foliation(X, 0.05, 0.0)
    for Y, Z in ((0.03, 0.04), (0.0, -0.05), (-0.04, 0.03)):
        assert abs(foliation(X, Y, Z) - reference) < 1e-10
