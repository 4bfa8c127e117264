"""Configuration: run-directory paths and the key=value config file."""

from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from .errors import ConfigError
from .models import BucketConfig, LossWeights, ModelConfig, RunConfig, TrainConfig

CHECKPOINT_FILENAME = "model.ckpt"
LOSS_LOG_FILENAME = "loss_log.tsv"
TRAIN_STATE_FILENAME = "train_state.npz"
RANKED_DIRNAME = "ranked"
EVALUATION_FILENAME = "evaluation.tsv"
RANKING_FILENAME = "ranking.tsv"
CLIFF_FILENAME = "cliffs.tsv"


def default_output_dir() -> Path:
    """Output directory used when none is configured."""
    return Path("runs") / "latest"


def checkpoint_path(root: Path) -> Path:
    return root / CHECKPOINT_FILENAME


def loss_log_path(root: Path) -> Path:
    return root / LOSS_LOG_FILENAME


def train_state_path(root: Path) -> Path:
    return root / TRAIN_STATE_FILENAME


def ranked_dir(root: Path) -> Path:
    return root / RANKED_DIRNAME


def evaluation_report_path(root: Path) -> Path:
    return root / EVALUATION_FILENAME


def ranking_report_path(root: Path) -> Path:
    return root / RANKING_FILENAME


def cliff_report_path(root: Path) -> Path:
    return root / CLIFF_FILENAME


def config_keys() -> dict[str, Any]:
    """Every accepted key with its pydantic field info, in declaration order."""
    return dict(RunConfig.model_fields)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = config_keys()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        for marker in (" #", "\t#"):
            if marker in line:
                line = line.split(marker, 1)[0].rstrip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def load_config_file(path: Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, source=str(path))


def _format_validation(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{where}: {item['msg']}")
    return "; ".join(parts)


def resolve_run_config(
    file_values: Mapping[str, Any] | None = None,
    preset_values: Mapping[str, Any] | None = None,
    flag_values: Mapping[str, Any] | None = None,
) -> BaseModel:
    """Merge defaults < preset < config file < flags and validate the result."""
    merged: dict[str, Any] = {}
    for layer in (preset_values, file_values, flag_values):
        if layer:
            merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        run = RunConfig.model_validate(merged)
        train_config_from_run(run)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {_format_validation(e)}") from e
    return run


def parse_thresholds(text: str) -> tuple[float, ...] | None:
    text = text.strip()
    if text in ("", "quartile"):
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bucket_thresholds must be 'quartile' or numbers, got '{text}'") from None


def _pick(values: Mapping[str, Any], model: type[BaseModel]) -> dict[str, Any]:
    return {k: values[k] for k in model.model_fields if k in values}


def train_config_from_run(run: BaseModel) -> TrainConfig:
    """Fold the flat run view back into the nested training configuration."""
    values = run.model_dump()
    buckets = _pick(values, BucketConfig)
    buckets["thresholds"] = parse_thresholds(values["bucket_thresholds"])
    return TrainConfig(
        **{k: v for k, v in _pick(values, TrainConfig).items() if k not in ("weights", "buckets", "model")},
        weights=LossWeights(**_pick(values, LossWeights)),
        buckets=BucketConfig(**buckets),
        model=ModelConfig(**_pick(values, ModelConfig)),
    )


def render_config_template() -> str:
    """A commented config file listing every key with its default."""
    lines = ["# hyperscreen run configuration", ""]
    for name, info in config_keys().items():
        if info.description:
            lines.append(f"# {info.description}")
        default = info.default
        shown = "" if default is None else str(default).lower() if isinstance(default, bool) else str(default)
        prefix = "# " if default is None else ""
        lines.append(f"{prefix}{name} = {shown}".rstrip())
        lines.append("")
    return "\n".join(lines)
