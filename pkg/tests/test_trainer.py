"""Tests for the optimizer, bucketing and the training loop."""

import numpy as np
import pytest

from hyperscreen.config import resolve_run_config, train_config_from_run
from hyperscreen.data import generate_synthetic
from hyperscreen.errors import ConfigError, DataError, NumericError
from hyperscreen.model import GradientBundle, grad_total_loss
from hyperscreen.models import Assay, BucketConfig, LigandEntry, LossWeights, ModelConfig, TrainConfig
from hyperscreen.storage import RunDirectory
from hyperscreen.templates.presets import preset_overrides
from hyperscreen.trainer import (
    TrainState,
    adam_step,
    clip_gradients,
    count_affinity_ties,
    learning_rate,
    load_train_state,
    resolve_buckets,
    save_train_state,
    train,
)


def tiny_config(**overrides):
    values = {
        "learning_rate": 1e-2,
        "epochs": 3,
        "batch_assays": 2,
        "seed": 5,
        "model": ModelConfig(embed_dim=6, init_std=0.1),
    }
    values.update(overrides)
    return TrainConfig(**values)


def assert_same_params(a, b):
    for key, value in a.to_arrays().items():
        np.testing.assert_array_equal(b.to_arrays()[key], value)


def test_adam_first_step_moves_by_learning_rate(tiny_params):
    """Test the bias-corrected first step moves each entry by about lr against its gradient sign."""
    grads = GradientBundle({k: np.full_like(v, 0.5) for k, v in tiny_params.to_arrays().items()})
    state = adam_step(TrainState.fresh(tiny_params), grads, tiny_config(), lr=0.1)
    assert state.step == 1
    before = tiny_params.to_arrays()["ligand.bias"]
    np.testing.assert_allclose(state.params.to_arrays()["ligand.bias"], before - 0.1, rtol=1e-6)


def test_adam_zero_gradient_keeps_params(tiny_batch, tiny_params):
    """Test an all-zero objective leaves every parameter where it was."""
    off = LossWeights(alpha_poc=0.0, alpha_seq=0.0, gamma_cone=0.0, lambda_ang_reg=0.0, lambda_het=0.0)
    result = grad_total_loss(tiny_batch, tiny_params, off)
    state = adam_step(TrainState.fresh(tiny_params), result.grads, tiny_config())
    assert_same_params(tiny_params, state.params)


def test_adam_rejects_non_finite_gradient(tiny_params):
    """Test NaN gradients stop the update."""
    grads = GradientBundle({k: np.full_like(v, np.nan) for k, v in tiny_params.to_arrays().items()})
    with pytest.raises(NumericError):
        adam_step(TrainState.fresh(tiny_params), grads, tiny_config())


def test_clip_gradients():
    """Test clipping rescales to the limit and reports it."""
    grads = GradientBundle({"x": np.array([3.0, 4.0])})
    clipped, was_clipped = clip_gradients(grads, 1.0)
    assert was_clipped
    assert clipped.global_norm() == pytest.approx(1.0)
    same, was_clipped = clip_gradients(grads, 10.0)
    assert not was_clipped
    assert same is grads


def test_cosine_learning_rate():
    """Test the cosine schedule starts at the base rate and halves midway."""
    config = tiny_config(epochs=4, lr_schedule="cosine")
    assert learning_rate(config, 0) == pytest.approx(1e-2)
    assert learning_rate(config, 2) == pytest.approx(5e-3)
    assert learning_rate(tiny_config(), 2) == 1e-2


def test_resolve_buckets_uses_quartiles(tiny_data):
    """Test unset thresholds become quartiles of -affinity."""
    assays, _ = tiny_data
    resolved = resolve_buckets(BucketConfig(), assays)
    keys = [-lg.affinity for a in assays for lg in a.ligands]
    assert resolved.thresholds[0] == pytest.approx(min(keys))
    assert len(resolved.thresholds) == 4
    assert list(resolved.thresholds) == sorted(resolved.thresholds)
    explicit = BucketConfig(thresholds=(0.0, 1.0))
    assert resolve_buckets(explicit, assays) is explicit


def test_count_affinity_ties():
    """Test repeated affinities within an assay are counted."""
    assay = Assay(
        assay_id="a",
        target_id="t",
        pocket_feature_ids=["p"],
        ligands=[
            LigandEntry(ligand_id="x", feature_id="x", affinity=1.0),
            LigandEntry(ligand_id="y", feature_id="y", affinity=1.0),
            LigandEntry(ligand_id="z", feature_id="z"),
        ],
    )
    assert count_affinity_ties([assay]) == 1


def test_same_seed_same_parameters(tiny_data):
    """Test two runs with one seed end bit-identical."""
    assays, store = tiny_data
    first = train(assays, store, tiny_config())
    second = train(assays, store, tiny_config())
    assert_same_params(first.params, second.params)
    assert [e.total for e in first.epochs] == [e.total for e in second.epochs]


def test_resume_matches_uninterrupted_run(tmp_path, tiny_data):
    """Test stopping after two epochs and resuming reproduces the four-epoch run."""
    assays, store = tiny_data
    full = train(assays, store, tiny_config(epochs=4), RunDirectory(tmp_path / "full"))
    run_dir = RunDirectory(tmp_path / "resumed")
    train(assays, store, tiny_config(epochs=2), run_dir)
    resumed = train(assays, store, tiny_config(epochs=4), run_dir, resume=True)
    assert_same_params(full.params, resumed.params)
    assert resumed.state.step == full.state.step
    epochs = [int(row["epoch"]) for row in run_dir.read_loss_log()]
    assert epochs == [1, 1, 2, 2, 3, 3, 4, 4]


def test_loss_log_rows_per_batch(tmp_path, tiny_data):
    """Test one loss-log row per batch with every term column."""
    assays, store = tiny_data
    run_dir = RunDirectory(tmp_path)
    train(assays, store, tiny_config(epochs=1), run_dir)
    rows = run_dir.read_loss_log()
    assert [int(r["batch"]) for r in rows] == [1, 2]
    assert "r_het" in rows[0]
    assert run_dir.checkpoint_path.exists()


def test_on_epoch_callback(tiny_data):
    """Test the callback sees each epoch's mean loss."""
    assays, store = tiny_data
    seen = []
    result = train(assays, store, tiny_config(epochs=2), on_epoch=seen.append)
    assert seen == result.epochs
    assert [e.epoch for e in seen] == [1, 2]


def test_resume_without_state(tmp_path, tiny_data):
    """Test resuming an empty directory raises DataError."""
    assays, store = tiny_data
    with pytest.raises(DataError):
        train(assays, store, tiny_config(), RunDirectory(tmp_path), resume=True)


def test_train_state_seed_mismatch(tmp_path, tiny_params):
    """Test a training state saved under another seed is refused."""
    path = tmp_path / "train_state.npz"
    save_train_state(path, TrainState.fresh(tiny_params), seed=1)
    with pytest.raises(ConfigError):
        load_train_state(path, seed=2)
    loaded = load_train_state(path, seed=1)
    assert_same_params(tiny_params, loaded.params)


def test_assays_without_ligands_are_skipped(tiny_data):
    """Test empty assays are dropped and an all-empty set is refused."""
    assays, store = tiny_data
    empty = assays[0].model_copy(update={"assay_id": "empty", "ligands": []})
    result = train([*assays, empty], store, tiny_config(epochs=1))
    assert len(result.epochs) == 1
    with pytest.raises(DataError):
        train([empty], store, tiny_config(epochs=1))


def test_missing_feature_reference(tiny_data):
    """Test an assay pointing at an unknown feature id is refused before training."""
    assays, store = tiny_data
    broken = assays[0].model_copy(update={"pocket_feature_ids": ["nowhere"]})
    with pytest.raises(DataError):
        train([broken], store, tiny_config(epochs=1))


def test_training_reduces_loss():
    """Test a few epochs on a separable fixture lower the mean loss."""
    assays, store = generate_synthetic(targets=4, ligands_per_assay=8, dim=8, noise=0.02, seed=3)
    config = tiny_config(epochs=15, batch_assays=4, model=ModelConfig(embed_dim=8, init_std=0.1))
    result = train(assays, store, config)
    assert result.epochs[-1].total < result.epochs[0].total


def test_synthetic_preset_loss_falls_fivefold():
    """Test the synthetic preset cuts the epoch loss below a fifth on a small fixture."""
    assays, store = generate_synthetic(targets=6, ligands_per_assay=20, dim=16, noise=0.05, seed=7)
    run = resolve_run_config(
        preset_values=preset_overrides(["synthetic"]),
        flag_values={"epochs": 80, "batch_assays": 2, "embed_dim": 16, "seed": 0},
    )
    result = train(assays, store, train_config_from_run(run))
    assert result.epochs[-1].total < 0.2 * result.epochs[0].total
