"""Tests for the built-in presets."""

import pytest

from hyperscreen.config import resolve_run_config, train_config_from_run
from hyperscreen.errors import ConfigError
from hyperscreen.templates.presets import BUILTIN_PRESETS, get_preset, preset_overrides


def test_builtin_presets():
    """Test the ablation presets are registered."""
    assert set(BUILTIN_PRESETS) == {"default", "synthetic", "no-hyp", "euclidean", "no-rang", "no-rhet", "no-seq"}
    assert get_preset("default").overrides == {}
    assert get_preset("missing") is None


@pytest.mark.parametrize("name", sorted(BUILTIN_PRESETS))
def test_every_preset_validates(name):
    """Test each preset resolves to a valid training configuration."""
    train_config_from_run(resolve_run_config(preset_values=preset_overrides([name])))


def test_presets_apply_left_to_right():
    """Test later presets override earlier ones."""
    merged = preset_overrides(["synthetic", "no-seq"])
    assert merged["epochs"] == 200
    assert merged["alpha_seq"] == 0.0


def test_no_seq_ablation():
    """Test the sequence ablation only zeroes the sequence tower."""
    config = train_config_from_run(resolve_run_config(preset_values=preset_overrides(["no-seq"])))
    assert config.weights.alpha_seq == 0.0
    assert config.weights.alpha_poc == 1.0


def test_unknown_preset():
    """Test an unknown preset name is a configuration error listing the choices."""
    with pytest.raises(ConfigError, match="available"):
        preset_overrides(["nope"])


def test_synthetic_preset_scales():
    """Test the synthetic preset starts from a scaled identity with a cosine schedule."""
    config = train_config_from_run(resolve_run_config(preset_values=preset_overrides(["synthetic"])))
    assert config.lr_schedule == "cosine"
    assert config.model.init_gain == 3.0
    assert config.model.tau == 5.0
