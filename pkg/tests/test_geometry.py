"""Tests for Lorentz-model geometry."""

import math

import numpy as np
import pytest

from hyperscreen.errors import GeometryError
from hyperscreen.geometry import (
    LorentzPoint,
    exp_map_origin,
    exterior_angle,
    half_aperture,
    lift_spatial,
    lorentz_distance,
    lorentz_inner,
    membership_residual,
)
from hyperscreen.models import Curvature


def test_origin_time_coordinate():
    """Test the origin sits at time 1/sqrt(kappa)."""
    origin = LorentzPoint.origin(3, 4.0)
    assert float(origin.time) == pytest.approx(0.5)
    np.testing.assert_array_equal(origin.spatial, np.zeros(3))


def test_exp_map_closed_form():
    """Test exp map of a unit tangent equals (cosh 1, sinh 1, 0)."""
    p = exp_map_origin([1.0, 0.0])
    assert float(p.time) == pytest.approx(math.cosh(1.0), rel=1e-14)
    np.testing.assert_allclose(p.spatial, [math.sinh(1.0), 0.0], rtol=1e-14)


def test_exp_map_accepts_curvature_model():
    """Test a Curvature model and a float give the same point."""
    a = exp_map_origin([0.3, -0.4], Curvature(kappa=2.0))
    b = exp_map_origin([0.3, -0.4], 2.0)
    np.testing.assert_array_equal(a.coords, b.coords)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_membership_of_exp_map(kappa):
    """Test exp-mapped points stay on the hyperboloid."""
    rng = np.random.default_rng(3)
    v = rng.normal(size=(500, 6))
    v *= rng.uniform(0.0, 10.0, size=(500, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    points = exp_map_origin(v, kappa)
    assert float(np.max(membership_residual(points, kappa))) <= 1e-9


def test_lorentz_inner_hand_value():
    """Test <(1, 0, 0), (sqrt 2, 1, 0)> is -sqrt 2."""
    value = float(lorentz_inner([1.0, 0.0, 0.0], [math.sqrt(2.0), 1.0, 0.0]))
    assert value == pytest.approx(-math.sqrt(2.0), rel=1e-15)


def test_exp_map_one_dimensional():
    """Test exp map of 0.7 on the line is (cosh 0.7, sinh 0.7)."""
    p = exp_map_origin([0.7])
    np.testing.assert_allclose(p.coords, [1.255169, 0.758584], atol=1e-6)
    np.testing.assert_allclose(p.coords, [math.cosh(0.7), math.sinh(0.7)], rtol=1e-14)


def test_membership_absolute_for_moderate_radius():
    """Test the absolute residual is tiny near the origin."""
    v = np.array([[2.0, 1.0, -1.5]])
    p = exp_map_origin(v)
    residual = abs(float(lorentz_inner(p, p)[0]) + 1.0)
    assert residual <= 1e-9


@pytest.mark.parametrize("norm", [1e-6, 1e-3, 0.5, 3.0, 10.0])
def test_radius_identity(norm):
    """Test the distance to the origin equals the tangent norm."""
    direction = np.array([0.6, -0.8, 0.0])
    p = exp_map_origin(norm * direction)
    d = float(lorentz_distance(p, LorentzPoint.origin(3)))
    assert abs(d - norm) / norm <= 1e-8
    assert float(p.radius()) == pytest.approx(norm, rel=1e-8)


def test_distance_to_self_is_zero():
    """Test coincident points have distance zero."""
    p = exp_map_origin([0.4, 1.2])
    assert float(lorentz_distance(p, p)) == 0.0


def test_distance_is_symmetric():
    """Test d(p, q) == d(q, p)."""
    p = exp_map_origin([0.4, 1.2])
    q = exp_map_origin([-1.0, 0.3])
    assert float(lorentz_distance(p, q)) == pytest.approx(float(lorentz_distance(q, p)), rel=1e-14)


def test_distance_triangle_inequality():
    """Test d(p, r) <= d(p, q) + d(q, r) on 1000 random triples."""
    rng = np.random.default_rng(5)
    p, q, r = (exp_map_origin(rng.normal(size=(1000, 4))) for _ in range(3))
    d_pr = lorentz_distance(p, r)
    assert np.all(d_pr <= lorentz_distance(p, q) + lorentz_distance(q, r) + 1e-12)


def test_distance_rejects_off_manifold_point():
    """Test a point off the hyperboloid is refused."""
    p = exp_map_origin([0.4, 1.2])
    bad = LorentzPoint(time=np.asarray(2.0), spatial=np.array([0.4, 1.2]))
    with pytest.raises(GeometryError):
        lorentz_distance(p, bad)


def test_distance_rejects_dimension_mismatch():
    """Test points of different dimension are refused."""
    with pytest.raises(GeometryError):
        lorentz_distance(exp_map_origin([0.1, 0.2]), exp_map_origin([0.1, 0.2, 0.3]))


def test_non_positive_curvature_rejected():
    """Test kappa <= 0 raises GeometryError."""
    with pytest.raises(GeometryError):
        exp_map_origin([0.1, 0.2], 0.0)


def test_non_finite_tangent_rejected():
    """Test NaN tangents raise GeometryError."""
    with pytest.raises(GeometryError):
        exp_map_origin([np.nan, 0.2])


def test_lift_spatial_is_on_manifold():
    """Test lifting spatial coordinates satisfies the hyperboloid equation."""
    p = lift_spatial([[0.3, 0.4], [3.0, -4.0]], 2.0)
    assert float(np.max(membership_residual(p, 2.0))) <= 1e-12


def test_exterior_angle_on_outward_ray_is_zero():
    """Test a ligand farther along the pocket's ray has angle 0."""
    pocket = exp_map_origin([1.0, 0.0])
    ligand = exp_map_origin([2.0, 0.0])
    assert float(exterior_angle(pocket, ligand)) == pytest.approx(0.0, abs=1e-6)


def test_exterior_angle_toward_origin_is_pi():
    """Test a ligand between the origin and the pocket has angle pi."""
    pocket = exp_map_origin([2.0, 0.0])
    ligand = exp_map_origin([1.0, 0.0])
    assert float(exterior_angle(pocket, ligand)) == pytest.approx(math.pi, abs=1e-6)


def test_exterior_angle_in_range():
    """Test exterior angles lie in [0, pi] for random pairs."""
    rng = np.random.default_rng(4)
    pockets = exp_map_origin(rng.normal(size=(50, 3)), 1.5)
    ligands = exp_map_origin(rng.normal(size=(50, 3)), 1.5)
    angles = exterior_angle(pockets, ligands, 1.5)
    assert np.all((angles >= 0.0) & (angles <= math.pi))


def test_exterior_angle_pocket_at_origin():
    """Test a pocket at the origin has no outward direction."""
    with pytest.raises(GeometryError):
        exterior_angle(LorentzPoint.origin(2), exp_map_origin([1.0, 0.0]))


def test_exterior_angle_coincident_points():
    """Test coincident pocket and ligand raise GeometryError."""
    p = exp_map_origin([1.0, 0.5])
    with pytest.raises(GeometryError):
        exterior_angle(p, p)


def test_half_aperture_near_origin_is_right_angle():
    """Test the aperture saturates at pi/2 close to the origin."""
    pocket = exp_map_origin([0.01, 0.0])
    assert float(half_aperture(pocket, r0=0.1)) == pytest.approx(math.pi / 2)


def test_half_aperture_shrinks_outward():
    """Test the aperture decreases as the pocket moves outward."""
    radii = np.linspace(0.5, 5.0, 10)
    pockets = exp_map_origin(radii[:, None] * np.array([1.0, 0.0]))
    omega = half_aperture(pockets, r0=0.1)
    assert np.all(np.diff(omega) < 0)


def test_half_aperture_rejects_bad_r0():
    """Test r0 must be positive."""
    with pytest.raises(GeometryError):
        half_aperture(exp_map_origin([1.0, 0.0]), r0=0.0)
