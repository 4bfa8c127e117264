"""Tests for the geometry and gradient property checks."""

import math

import pytest

from hyperscreen.geometry import LorentzPoint, exp_map_origin, exterior_angle, lorentz_distance
from hyperscreen.selfcheck import (
    check_aperture_monotone,
    check_exterior_angle,
    check_gradients,
    check_quadratic_oracle,
    check_radius_identity,
    check_small_angle,
    law_of_cosines_exterior_angle,
    off_kink,
    probe_problem,
    run_geomcheck,
    small_angle_ratios,
)


def test_law_of_cosines_collinear():
    """Test a straight continuation has exterior angle 0 and a reversal has pi."""
    assert law_of_cosines_exterior_angle(1.0, 0.5, 1.5) == pytest.approx(0.0, abs=1e-6)
    assert law_of_cosines_exterior_angle(1.0, 0.5, 0.5) == pytest.approx(math.pi, abs=1e-6)


@pytest.mark.parametrize("tangent", [[2.0, 2e-3, 0.0, 0.0], [0.3, 2e-3, 0.0, 0.0], [2.0, 0.0, 1e-4, 0.0]])
def test_exterior_angle_matches_oracle_near_zero_and_pi(tangent):
    """Test nearly straight and nearly reversed triangles against the law of cosines."""
    pocket = exp_map_origin([1.0, 0.0, 0.0, 0.0])
    ligand = exp_map_origin(tangent)
    origin = LorentzPoint.origin(4)
    a = float(lorentz_distance(origin, pocket))
    b = float(lorentz_distance(pocket, ligand))
    c = float(lorentz_distance(origin, ligand))
    expected = law_of_cosines_exterior_angle(a, b, c)
    assert min(expected, math.pi - expected) < 1e-2
    assert float(exterior_angle(pocket, ligand)) == pytest.approx(expected, abs=1e-6)


def test_exterior_angle_check_passes():
    """Test the exterior-angle oracle check on a fresh seed."""
    result = check_exterior_angle(seed=3, samples=300)
    assert result.passed
    assert "300 triples" in result.detail


def test_radius_identity_passes():
    """Test the radius identity holds on the log grid."""
    assert check_radius_identity().passed


def test_aperture_monotone_passes():
    """Test the aperture check passes."""
    assert check_aperture_monotone().passed


def test_small_angle_ratio_converges():
    """Test the ratio approaches sinh(r)/r as theta shrinks."""
    (_, ratio, _), = small_angle_ratios([1e-4])
    assert ratio == pytest.approx(math.sinh(2.0) / 2.0, rel=1e-3)
    assert all(r.passed for r in check_small_angle([1e-2, 1e-3]))


def test_quadratic_oracle_passes():
    """Test central differences are exact on a quadratic."""
    assert check_quadratic_oracle(0).passed


def test_probe_is_off_kink():
    """Test probe batches keep every hinge away from its kink."""
    batch, params, weights = probe_problem(seed=3, index=1)
    assert off_kink(batch, params, weights)
    assert params.pocket_head.n_hidden > 0


def test_probe_is_deterministic():
    """Test the same seed and index give the same probe."""
    a = probe_problem(seed=2, index=0)[1].to_arrays()
    b = probe_problem(seed=2, index=0)[1].to_arrays()
    assert all((a[k] == b[k]).all() for k in a)


def test_corrupted_gradient_is_caught():
    """Test doubling one gradient entry fails the check."""
    result = check_gradients(seed=0, batches=1, corrupt=True)
    assert not result.passed
    assert result.measured > 0.1


def test_run_geomcheck_passes():
    """Test every property check passes with one gradient probe."""
    results = run_geomcheck(seed=0, fd_batches=1)
    failed = [r.name for r in results if not r.passed]
    assert failed == []
    assert results[-1].name == "gradient check"


def test_run_geomcheck_without_gradients():
    """Test fd_batches = 0 skips the gradient probes."""
    names = [r.name for r in run_geomcheck(seed=0, fd_batches=0)]
    assert "gradient check" not in names


@pytest.mark.slow
def test_gradients_on_twenty_probes():
    """Test reverse-mode gradients on the full set of probe batches."""
    assert check_gradients(seed=0, batches=20).passed
