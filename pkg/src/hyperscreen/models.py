"""Pydantic models for hyperscreen configuration and assay records."""

import math
from copy import copy
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, create_model, field_validator, model_validator

LOSS_TERMS = (
    "cont_poc",
    "rank_poc",
    "cont_seq",
    "rank_seq",
    "cone_rad",
    "cone_ang",
    "r_ang",
    "r_het",
)

DEFAULT_QUARTILE_TIERS = 3


class Curvature(BaseModel):
    """Curvature magnitude kappa; the space has constant curvature -kappa."""

    model_config = ConfigDict(frozen=True)

    kappa: float = Field(default=1.0, gt=0, allow_inf_nan=False)

    @property
    def sqrt(self) -> float:
        return float(self.kappa) ** 0.5


class BucketConfig(BaseModel):
    """Affinity tiers and the radial/angular caps attached to each tier."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    thresholds: tuple[float, ...] | None = Field(
        default=None,
        description="Strictly increasing tier boundaries on the bucket key; unset uses quartiles",
    )
    base_radius: float = Field(default=1.0, gt=0, description="Radial cap of bucket 0")
    radius_step: float = Field(default=0.5, gt=0, description="Radial cap increment per bucket")
    base_angle_scale: float = Field(default=1.0, gt=0, description="Aperture scale of bucket 0")
    angle_step: float = Field(default=0.2, gt=0, description="Aperture scale decrement per bucket")
    aperture_r0: float = Field(
        default=0.1, gt=0, description="Constant bounding the cone half-aperture near the origin"
    )

    @property
    def tiers(self) -> int:
        """Index K of the last bucket."""
        if self.thresholds is None:
            return DEFAULT_QUARTILE_TIERS
        return len(self.thresholds) - 1

    @model_validator(mode="after")
    def _check_tiers(self) -> "BucketConfig":
        if self.thresholds is not None:
            if len(self.thresholds) == 0:
                raise ValueError("thresholds must not be empty")
            if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
                raise ValueError("thresholds must be strictly increasing")
        if self.base_angle_scale - self.tiers * self.angle_step <= 0:
            raise ValueError(
                f"base_angle_scale - {self.tiers} * angle_step must stay positive"
            )
        return self

    def radius_cap(self, bucket: int) -> float:
        return self.base_radius + bucket * self.radius_step

    def angle_scale(self, bucket: int) -> float:
        return self.base_angle_scale - bucket * self.angle_step


class LossWeights(BaseModel):
    """Coefficients of the training objective."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha_poc: float = Field(default=1.0, ge=0, description="Weight of the pocket tower")
    alpha_seq: float = Field(default=0.5, ge=0, description="Weight of the sequence tower")
    lambda_rank: float = Field(default=1.0, ge=0, description="Listwise loss weight in each tower")
    gamma_cone: float = Field(default=1.0, ge=0, description="Weight of the cone hierarchy loss")
    lambda_rad: float = Field(default=1.0, ge=0, description="Radial hinge weight inside the cone loss")
    lambda_ang_cone: float = Field(
        default=1.0, ge=0, description="Angular hinge weight inside the cone loss"
    )
    lambda_ang_reg: float = Field(default=0.1, ge=0, description="Angular margin regularizer weight")
    lambda_het: float = Field(default=0.1, ge=0, description="Heterogeneity regularizer weight")
    margin: float = Field(default=0.1, ge=0, description="Angular margin m of the regularizer")
    affinity_threshold: float | None = Field(
        default=None,
        description="Actives with affinity below this value enter the heterogeneity term; unset means all",
    )

    @field_validator("*")
    @classmethod
    def _finite(cls, value: Any) -> Any:
        if isinstance(value, float) and not math.isfinite(value):
            raise ValueError("weights must be finite")
        return value

    def coefficients(self) -> dict[str, float]:
        """Total coefficient of every loss term in the objective."""
        return {
            "cont_poc": self.alpha_poc,
            "rank_poc": self.alpha_poc * self.lambda_rank,
            "cont_seq": self.alpha_seq,
            "rank_seq": self.alpha_seq * self.lambda_rank,
            "cone_rad": self.gamma_cone * self.lambda_rad,
            "cone_ang": self.gamma_cone * self.lambda_ang_cone,
            "r_ang": self.lambda_ang_reg,
            "r_het": self.lambda_het,
        }

    @property
    def uses_hyperbolic_terms(self) -> bool:
        coef = self.coefficients()
        return any(coef[t] > 0 for t in ("cone_rad", "cone_ang", "r_ang", "r_het"))


class ModelConfig(BaseModel):
    """Shape and initialisation of the projection heads."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    embed_dim: int = Field(default=64, ge=1, description="Embedding (tangent) dimension of every head")
    hidden_dim: int = Field(default=0, ge=0, description="Width of an optional tanh hidden layer; 0 disables")
    kappa: float = Field(default=1.0, gt=0, allow_inf_nan=False, description="Curvature magnitude")
    tau: float = Field(default=0.07, gt=0, allow_inf_nan=False, description="Logit temperature")
    learn_tau: bool = Field(default=False, description="Train log(tau) together with the heads")
    geometry: Literal["lorentz", "euclidean"] = Field(
        default="lorentz", description="Embedding space; euclidean skips the exponential map"
    )
    init_gain: float = Field(default=1.0, description="Scale of the identity part of head initialisation")
    init_std: float = Field(default=0.01, ge=0, description="Std of the Gaussian part of head initialisation")


class TrainConfig(BaseModel):
    """Optimizer, batching and objective settings for one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=1e-4, gt=0, description="Adam step size")
    adam_beta1: float = Field(default=0.9, gt=0, lt=1, description="Adam first-moment decay")
    adam_beta2: float = Field(default=0.999, gt=0, lt=1, description="Adam second-moment decay")
    adam_eps: float = Field(default=1e-8, gt=0, description="Adam denominator epsilon")
    epochs: int = Field(default=50, ge=1, description="Number of passes over the assays")
    batch_assays: int = Field(default=8, ge=1, description="Assays per batch")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Master seed for every random stream")
    grad_clip: float = Field(default=10.0, gt=0, description="Global gradient-norm clip")
    lr_schedule: Literal["constant", "cosine"] = Field(
        default="constant", description="Learning-rate schedule"
    )
    checkpoint_every: int = Field(
        default=0, ge=0, description="Write checkpoint and training state every N epochs; 0 only at the end"
    )
    threads: int = Field(default=1, ge=1, description="Worker threads for scoring")
    weights: LossWeights = Field(default_factory=LossWeights)
    buckets: BucketConfig = Field(default_factory=BucketConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)

    @model_validator(mode="after")
    def _check_objective(self) -> "TrainConfig":
        if self.weights.alpha_poc <= 0 and self.weights.alpha_seq <= 0:
            raise ValueError("at least one of alpha_poc, alpha_seq must be positive")
        if self.model.geometry == "euclidean" and self.weights.uses_hyperbolic_terms:
            raise ValueError(
                "euclidean geometry requires gamma_cone, lambda_ang_reg and lambda_het to be 0"
            )
        return self


class LigandEntry(BaseModel):
    """One tested ligand of an assay."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    ligand_id: str = Field(min_length=1)
    feature_id: str = Field(min_length=1)
    active: bool | None = None
    affinity: float | None = Field(default=None, allow_inf_nan=False)


class Assay(BaseModel):
    """One experimental unit: a target, its candidate pockets and the ligands tested."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    assay_id: str = Field(min_length=1)
    target_id: str = Field(min_length=1)
    pocket_feature_ids: list[str] = Field(min_length=1)
    sequence_feature_id: str | None = None
    ligands: list[LigandEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_ligands(self) -> "Assay":
        seen: set[str] = set()
        for ligand in self.ligands:
            if ligand.ligand_id in seen:
                raise ValueError(
                    f"duplicate ligand_id '{ligand.ligand_id}' in assay '{self.assay_id}'"
                )
            seen.add(ligand.ligand_id)
        return self

    @property
    def is_labeled(self) -> bool:
        return any(ligand.active is not None for ligand in self.ligands)


class AssayFileHeader(BaseModel):
    """First line of an assay file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    format: Literal["hypseek-assays"]
    version: Literal[1]
    affinity_orientation: Literal["higher_stronger", "lower_stronger"]


class CliffPairSpec(BaseModel):
    """Synthetic activity-cliff fixture: near-identical ligands with a large affinity gap."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    feature_epsilon: float = Field(default=0.01, ge=0, description="Feature-space distance of a pair")
    affinity_gap: float = Field(default=3.0, gt=0, description="Affinity difference within a pair")
    pair_count: int = Field(default=50, ge=1)
    base_radius: float = Field(default=1.0, gt=0, description="Norm of the target prototypes")
    targets: int = Field(default=20, ge=1)
    ligands_per_assay: int = Field(default=50, ge=1)
    dim: int = Field(default=64, ge=1)
    noise: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _small_epsilon(self) -> "CliffPairSpec":
        if self.feature_epsilon >= 0.1 * self.base_radius:
            raise ValueError("feature_epsilon must be much smaller than base_radius")
        return self


def _section(model: type[BaseModel], skip: tuple[str, ...] = ()) -> dict[str, Any]:
    return {
        name: (info.annotation, copy(info))
        for name, info in model.model_fields.items()
        if name not in skip
    }


# Flat key=value view over every section; the config file, the generated command-line
# options and `config keys` all read this one model.
RunConfig: type[BaseModel] = create_model(
    "RunConfig",
    __config__=ConfigDict(frozen=True, extra="forbid"),
    assays=(str | None, Field(default=None, description="Assay file (JSON lines)")),
    features=(str | None, Field(default=None, description="Feature file (HYPSF1)")),
    output_dir=(str, Field(default="runs/latest", description="Directory for run artifacts")),
    **_section(TrainConfig, skip=("weights", "buckets", "model")),
    **_section(ModelConfig),
    **_section(LossWeights),
    bucket_thresholds=(
        str,
        Field(
            default="quartile",
            description="Comma-separated bucket boundaries on -affinity, or 'quartile'",
        ),
    ),
    **_section(BucketConfig, skip=("thresholds",)),
)


class RunPreset(BaseModel):
    """A named set of configuration overrides."""

    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    overrides: dict[str, Any] = Field(default_factory=dict)
