"""Tests for the objective terms."""

import math

import numpy as np
import pytest

from hyperscreen.errors import GeometryError, NumericError
from hyperscreen.geometry import exp_map_origin, exterior_angle, half_aperture
from hyperscreen.losses import (
    LogitMatrix,
    affinity_order,
    angular_margin_reg,
    assign_buckets,
    cone_loss,
    contrastive_components,
    contrastive_loss,
    heterogeneity_reg,
    heterogeneity_weights,
    listwise_rank_loss,
    positive_mask,
    quartile_thresholds,
    total_loss,
)
from hyperscreen.models import BucketConfig, LossWeights


def test_contrastive_single_pair_is_zero():
    """Test one assay with one positive ligand has zero loss."""
    assert contrastive_loss([[3.0]], [[0]]) == pytest.approx(0.0, abs=1e-15)


def test_contrastive_two_by_two():
    """Test the symmetric loss on a diagonal 2x2 logit matrix."""
    loss = contrastive_loss([[2.0, 0.0], [0.0, 2.0]], [[0], [1]])
    assert loss == pytest.approx(2.0 * math.log1p(math.exp(-2.0)), rel=1e-12)


def test_contrastive_rows_without_positives_contribute_nothing():
    """Test an assay without actives adds zero to both directions."""
    row, col = contrastive_components([[1.0, 0.5], [0.2, 0.7]], [[0], []])
    assert row[1] == 0.0
    assert col[1] == 0.0


def test_contrastive_shift_invariant():
    """Test adding a constant to every logit leaves the loss unchanged."""
    logits = np.array([[1.0, -0.5, 0.3], [0.2, 0.9, -1.0]])
    positives = [[0, 2], [1]]
    assert contrastive_loss(logits + 5.0, positives) == pytest.approx(
        contrastive_loss(logits, positives), rel=1e-12
    )


def test_contrastive_hand_values():
    """Test a 1x2 row of equal logits and the row term of logits (2, 0)."""
    assert contrastive_loss([[0.0, 0.0]], [[0]]) == pytest.approx(0.5 * math.log(2.0), rel=1e-12)
    assert contrastive_loss([[0.0, 0.0]], [[0]]) == pytest.approx(0.3466, abs=1e-4)
    row, col = contrastive_components([[2.0, 0.0]], [[0]])
    assert row[0] == pytest.approx(0.126928, abs=1e-6)
    assert col[0] == pytest.approx(0.0, abs=1e-15)


def test_halving_temperature_keeps_row_argmax():
    """Test halving tau doubles every logit and keeps each row's argmax."""
    rng = np.random.default_rng(2)
    queries, ligands = rng.normal(size=(4, 5)), rng.normal(size=(9, 5))
    warm = LogitMatrix.from_embeddings(queries, ligands, 0.2)
    cold = LogitMatrix.from_embeddings(queries, ligands, 0.1)
    np.testing.assert_allclose(cold.values, 2.0 * warm.values, rtol=1e-12)
    np.testing.assert_array_equal(cold.values.argmax(axis=1), warm.values.argmax(axis=1))


def test_contrastive_rejects_bad_positive_index():
    """Test out-of-range positive columns raise ValueError."""
    with pytest.raises(ValueError):
        contrastive_loss([[1.0, 2.0]], [[5]])


def test_positive_mask():
    """Test the mask marks each assay's own actives only."""
    mask = positive_mask(np.array([0, 0, 1]), np.array([True, False, True]), 2)
    np.testing.assert_array_equal(mask, [[True, False, False], [False, False, True]])


def test_logit_matrix_validation():
    """Test temperature and finiteness checks of LogitMatrix."""
    with pytest.raises(ValueError):
        LogitMatrix(values=np.zeros((1, 1)), tau=0.0)
    with pytest.raises(NumericError):
        LogitMatrix(values=np.array([[np.inf]]), tau=1.0)


def test_listwise_single_item_is_zero():
    """Test a one-element list has zero listwise loss."""
    assert listwise_rank_loss([4.2]) == pytest.approx(0.0, abs=1e-15)


def test_listwise_two_equal_scores():
    """Test two tied scores give log(2) times the first decay weight."""
    assert listwise_rank_loss([1.0, 1.0]) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)


def test_listwise_prefers_correct_order():
    """Test scores agreeing with the ranking give a lower loss."""
    assert listwise_rank_loss([3.0, 2.0, 1.0]) < listwise_rank_loss([1.0, 2.0, 3.0])


def test_listwise_swap_into_order_lowers_loss():
    """Test swapping an adjacent out-of-order pair into order always lowers the loss."""
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(300):
        scores = rng.normal(size=int(rng.integers(2, 12)))
        violations = np.flatnonzero(scores[:-1] < scores[1:])
        if violations.size == 0:
            continue
        k = int(rng.choice(violations))
        swapped = scores.copy()
        swapped[[k, k + 1]] = swapped[[k + 1, k]]
        assert listwise_rank_loss(swapped) < listwise_rank_loss(scores)
        checked += 1
    assert checked > 200


def test_listwise_empty_rejected():
    """Test an empty list raises ValueError."""
    with pytest.raises(ValueError):
        listwise_rank_loss([])


def test_affinity_order_skips_missing_and_keeps_ties_stable():
    """Test NaN affinities are dropped and ties keep input order."""
    order = affinity_order([0.5, np.nan, 2.0, 0.5])
    np.testing.assert_array_equal(order, [2, 0, 3])


def test_quartile_thresholds():
    """Test quartiles of 1..5."""
    assert quartile_thresholds([1.0, 2.0, 3.0, 4.0, 5.0]) == (1.0, 2.0, 3.0, 4.0)


def test_assign_buckets_clamps_out_of_range():
    """Test values below t0 land in 0 and values at or above tK in K."""
    config = BucketConfig(thresholds=(0.0, 1.0, 2.0, 3.0))
    buckets = assign_buckets([-5.0, 0.0, 0.5, 1.0, 2.9, 3.0, 10.0], config)
    np.testing.assert_array_equal(buckets, [0, 0, 0, 1, 2, 3, 3])


def test_assign_buckets_is_monotone():
    """Test larger keys never land in a smaller bucket."""
    rng = np.random.default_rng(6)
    values = np.sort(rng.uniform(-2.0, 6.0, size=500))
    buckets = assign_buckets(values, BucketConfig(thresholds=(0.0, 1.0, 2.0, 4.0)))
    assert np.all(np.diff(buckets) >= 0)


def test_assign_buckets_needs_thresholds():
    """Test unresolved quartile thresholds raise ValueError."""
    with pytest.raises(ValueError):
        assign_buckets([0.1], BucketConfig())


def test_heterogeneity_weights():
    """Test rank discounts and the affinity threshold."""
    weights = heterogeneity_weights([3.0, 1.0, 2.0], None)
    np.testing.assert_allclose(weights, [1.0, 0.5, 1.0 / math.log2(3.0)])
    gated = heterogeneity_weights([3.0, 1.0, 2.0], 2.5)
    np.testing.assert_allclose(gated, [0.0, 0.5, 1.0 / math.log2(3.0)])


def test_heterogeneity_reg_uniform_logits():
    """Test the penalty on uniform logits is log(2) times the weight sum."""
    value = heterogeneity_reg([[0.0, 0.0]], [[1.0, 2.0]], None)
    assert value == pytest.approx(math.log(2.0) * (1.0 / math.log2(3.0) + 1.0), rel=1e-12)


def test_heterogeneity_reg_two_equal_actives_below_threshold():
    """Test two tied actives under the threshold cost (1 + 1/log2 3) ln 2."""
    value = heterogeneity_reg([[0.0, 0.0]], [[2.0, 1.0]], 10.0)
    assert value == pytest.approx((1.0 + 1.0 / math.log2(3.0)) * math.log(2.0), rel=1e-12)
    assert value == pytest.approx(1.1306, abs=2e-4)


def test_cone_loss_inside_cap_is_zero():
    """Test a ligand on the pocket's ray within the radial cap costs nothing."""
    pockets = exp_map_origin([[1.0, 0.0]])
    ligands = exp_map_origin([[1.5, 0.0]])
    loss = cone_loss(pockets, ligands, [0], [0], BucketConfig(), LossWeights())
    assert loss.rad == pytest.approx(0.0, abs=1e-12)
    assert loss.ang == pytest.approx(0.0, abs=1e-12)
    assert loss.combined == pytest.approx(0.0, abs=1e-12)


def test_cone_loss_radial_hinge():
    """Test a ligand beyond the cap pays its excess distance."""
    pockets = exp_map_origin([[1.0, 0.0]])
    ligands = exp_map_origin([[4.0, 0.0]])
    loss = cone_loss(pockets, ligands, [0], [0], BucketConfig(), LossWeights())
    assert loss.rad == pytest.approx(2.0, rel=1e-9)
    assert loss.ang == pytest.approx(0.0, abs=1e-12)


def random_cone_inputs(seed):
    rng = np.random.default_rng(seed)
    pockets = exp_map_origin(rng.normal(size=(4, 3)) + np.array([1.5, 0.0, 0.0]))
    ligands = exp_map_origin(2.0 * rng.normal(size=(40, 3)))
    return pockets, ligands, rng.integers(0, 4, size=40), rng.integers(0, 4, size=40)


def test_cone_loss_non_increasing_in_caps():
    """Test loosening the radial cap or the angle scale never raises the cone loss."""
    pockets, ligands, owners, buckets = random_cone_inputs(8)
    weights = LossWeights()
    thresholds = (0.0, 1.0, 2.0, 3.0)
    by_radius = [
        cone_loss(pockets, ligands, owners, buckets, BucketConfig(thresholds=thresholds, base_radius=r), weights)
        for r in (0.1, 0.5, 1.0, 2.0, 4.0)
    ]
    assert all(b.rad <= a.rad + 1e-12 for a, b in zip(by_radius, by_radius[1:]))
    assert by_radius[0].rad > by_radius[-1].rad
    by_scale = [
        cone_loss(pockets, ligands, owners, buckets, BucketConfig(thresholds=thresholds, base_angle_scale=s), weights)
        for s in (0.7, 1.0, 2.0, 5.0, 20.0)
    ]
    assert all(b.ang <= a.ang + 1e-12 for a, b in zip(by_scale, by_scale[1:]))
    assert by_scale[0].ang > by_scale[-1].ang


def test_cone_loss_coincident_points():
    """Test a ligand on top of its pocket raises GeometryError."""
    points = exp_map_origin([[1.0, 0.0]])
    with pytest.raises(GeometryError):
        cone_loss(points, points, [0], [0], BucketConfig(), LossWeights())


def test_angular_margin_reg_on_ray():
    """Test the margin hinge equals margin minus the half-aperture on the ray."""
    pockets = exp_map_origin([[1.0, 0.0]])
    ligands = exp_map_origin([[2.0, 0.0]])
    value = angular_margin_reg(pockets, ligands, [0], [0], BucketConfig(), margin=0.5)
    expected = 0.5 - math.asin(0.2 / math.sinh(1.0))
    assert value == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("offset, expected", [(0.0, 0.1), (-0.2, 0.0)])
def test_angular_margin_reg_at_and_below_boundary(offset, expected):
    """Test a ligand at angle scale times aperture plus offset with margin 0.1."""
    pockets = exp_map_origin([[1.0, 0.0]])
    ligands = exp_map_origin([[1.5, 0.5]])
    phi = float(exterior_angle(pockets, ligands)[0])
    omega = float(half_aperture(pockets)[0])
    config = BucketConfig(thresholds=(0.0, 1.0), base_angle_scale=(phi - offset) / omega, angle_step=0.01)
    value = angular_margin_reg(pockets, ligands, [0], [0], config, margin=0.1)
    assert value == pytest.approx(expected, abs=1e-9)
    assert cone_loss(pockets, ligands, [0], [0], config, LossWeights()).ang == pytest.approx(0.0, abs=1e-9)


def test_angular_margin_reg_without_margin_is_angular_hinge():
    """Test m = 0 reproduces the unweighted angular cone term."""
    pockets, ligands, owners, buckets = random_cone_inputs(9)
    config = BucketConfig(thresholds=(0.0, 1.0, 2.0, 3.0))
    plain = cone_loss(pockets, ligands, owners, buckets, config, LossWeights()).ang
    assert angular_margin_reg(pockets, ligands, owners, buckets, config, margin=0.0) == pytest.approx(plain, rel=1e-12)
    assert angular_margin_reg(pockets, ligands, owners, buckets, config, margin=0.1) > plain


def test_total_loss_weights_terms():
    """Test the weighted sum and the breakdown."""
    weights = LossWeights(alpha_seq=0.0, gamma_cone=0.0, lambda_ang_reg=0.0, lambda_het=0.0)
    total, breakdown = total_loss({"cont_poc": 2.0, "rank_poc": 3.0, "cont_seq": 9.0}, weights)
    assert total == pytest.approx(5.0)
    assert breakdown["cont_seq"] == 0.0


def test_total_loss_ignores_non_finite_zero_weight_term():
    """Test a NaN in a switched-off term is never checked."""
    weights = LossWeights(alpha_seq=0.0)
    total, _ = total_loss({"cont_poc": 1.0, "cont_seq": float("nan")}, weights)
    assert math.isfinite(total)


def test_total_loss_names_non_finite_term():
    """Test a non-finite weighted term raises NumericError naming it."""
    with pytest.raises(NumericError) as excinfo:
        total_loss({"r_het": float("inf")}, LossWeights())
    assert excinfo.value.term == "r_het"


def test_total_loss_rejects_unknown_term():
    """Test unknown term names raise ValueError."""
    with pytest.raises(ValueError):
        total_loss({"bogus": 1.0}, LossWeights())
