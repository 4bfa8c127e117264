"""Built-in run presets: desk-scale training and the component ablations."""

from collections.abc import Sequence
from typing import Any

from ..errors import ConfigError
from ..models import RunPreset

HYPERBOLIC_TERMS_OFF = {"gamma_cone": 0.0, "lambda_ang_reg": 0.0, "lambda_het": 0.0}

DEFAULT_PRESET = RunPreset(
    name="default",
    description="Full objective with the stock optimizer settings",
)

SYNTHETIC_PRESET = RunPreset(
    name="synthetic",
    description="Desk-scale training for the synthetic fixtures",
    overrides={
        "epochs": 200,
        "learning_rate": 0.005,
        "lr_schedule": "cosine",
        "batch_assays": 5,
        # trained radii grow with tau
        "tau": 5.0,
        "init_gain": 3.0,
    },
)

NO_HYP_PRESET = RunPreset(
    name="no-hyp",
    description="Ablation - cone loss, angular and heterogeneity regularizers off",
    overrides=HYPERBOLIC_TERMS_OFF,
)

EUCLIDEAN_PRESET = RunPreset(
    name="euclidean",
    description="Ablation - no exponential map, contrastive and listwise terms only",
    overrides={**HYPERBOLIC_TERMS_OFF, "geometry": "euclidean"},
)

NO_RANG_PRESET = RunPreset(
    name="no-rang",
    description="Ablation - angular margin regularizer off",
    overrides={"lambda_ang_reg": 0.0},
)

NO_RHET_PRESET = RunPreset(
    name="no-rhet",
    description="Ablation - heterogeneity regularizer off",
    overrides={"lambda_het": 0.0},
)

NO_SEQ_PRESET = RunPreset(
    name="no-seq",
    description="Ablation - sequence tower off",
    overrides={"alpha_seq": 0.0},
)

BUILTIN_PRESETS: dict[str, RunPreset] = {
    p.name: p
    for p in (
        DEFAULT_PRESET,
        SYNTHETIC_PRESET,
        NO_HYP_PRESET,
        EUCLIDEAN_PRESET,
        NO_RANG_PRESET,
        NO_RHET_PRESET,
        NO_SEQ_PRESET,
    )
}


def get_preset(name: str) -> RunPreset | None:
    """Get a preset by name."""
    return BUILTIN_PRESETS.get(name)


def preset_overrides(names: Sequence[str]) -> dict[str, Any]:
    """Overrides of several presets applied left to right."""
    merged: dict[str, Any] = {}
    for name in names:
        preset = get_preset(name)
        if preset is None:
            known = ", ".join(BUILTIN_PRESETS)
            raise ConfigError(f"unknown preset '{name}' (available: {known})")
        merged.update(preset.overrides)
    return merged
