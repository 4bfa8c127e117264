"""Assay-level batching, Adam and the training loop."""

import io
import math
import zipfile
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .data import FeatureStore, validate_references
from .errors import ConfigError, DataError, FormatError, NumericError
from .log import get_logger
from .losses import quartile_thresholds
from .model import (
    GradientBundle,
    ModelParams,
    build_batch,
    decode_checkpoint,
    encode_checkpoint,
    grad_total_loss,
    init_params,
    save_checkpoint,
)
from .models import LOSS_TERMS, Assay, BucketConfig, TrainConfig
from .seeding import derive_rng
from .storage import RunDirectory, atomic_write_bytes, read_bytes

logger = get_logger(__name__)

Array = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class TrainState:
    """Parameters, Adam moments, step count and completed epochs.

    Every random stream is derived from (seed, label, epoch), so ``epoch`` is all the
    RNG state a resumed run needs.
    """

    params: ModelParams
    m: dict[str, Array]
    v: dict[str, Array]
    step: int = 0
    epoch: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "TrainState":
        zeros = {k: np.zeros_like(a) for k, a in params.to_arrays().items()}
        return cls(params, zeros, {k: z.copy() for k, z in zeros.items()})


class EpochLoss(NamedTuple):
    epoch: int
    total: float
    breakdown: dict[str, float]


class TrainResult(NamedTuple):
    params: ModelParams
    epochs: list[EpochLoss]
    state: TrainState
    buckets: BucketConfig


def adam_step(
    state: TrainState, grads: GradientBundle, config: TrainConfig, lr: float | None = None
) -> TrainState:
    """One bias-corrected Adam update of every trainable array."""
    if not grads.is_finite():
        bad = [k for k, g in grads.arrays.items() if not np.all(np.isfinite(g))]
        raise NumericError(f"non-finite gradient for {', '.join(bad)}", term=bad[0])
    params = state.params.to_arrays()
    if set(params) != set(grads.arrays):
        raise ValueError("gradient keys do not match the parameters")
    lr = config.learning_rate if lr is None else lr
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    t = state.step + 1
    m, v, updated = {}, {}, {}
    for key, p in params.items():
        g = grads.arrays[key]
        m[key] = b1 * state.m[key] + (1.0 - b1) * g
        v[key] = b2 * state.v[key] + (1.0 - b2) * g * g
        m_hat = m[key] / (1.0 - b1**t)
        v_hat = v[key] / (1.0 - b2**t)
        updated[key] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return TrainState(state.params.with_arrays(updated), m, v, t, state.epoch)


def clip_gradients(grads: GradientBundle, max_norm: float) -> tuple[GradientBundle, bool]:
    norm = grads.global_norm()
    if norm <= max_norm:
        return grads, False
    return grads.scaled(max_norm / norm), True


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Step size for a 0-based epoch."""
    if config.lr_schedule == "cosine":
        return config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))
    return config.learning_rate


def resolve_buckets(buckets: BucketConfig, assays: Sequence[Assay]) -> BucketConfig:
    """Fill quartile thresholds from the training bucket keys (-affinity)."""
    if buckets.thresholds is not None:
        return buckets
    keys = [-lg.affinity for a in assays for lg in a.ligands if lg.affinity is not None]
    if not keys:
        return buckets
    return BucketConfig(**{**buckets.model_dump(), "thresholds": quartile_thresholds(keys)})


def count_affinity_ties(assays: Sequence[Assay]) -> int:
    """Ligands whose affinity repeats an earlier one in the same assay."""
    ties = 0
    for assay in assays:
        values = [lg.affinity for lg in assay.ligands if lg.affinity is not None]
        ties += len(values) - len(set(values))
    return ties


# Training state file


def save_train_state(path: Path, state: TrainState, seed: int) -> None:
    arrays: dict[str, NDArray[np.generic]] = {
        "checkpoint": np.frombuffer(encode_checkpoint(state.params), dtype=np.uint8),
        "step": np.array(state.step, dtype=np.int64),
        "epoch": np.array(state.epoch, dtype=np.int64),
        "seed": np.array(seed, dtype=np.uint64),
    }
    for key in state.m:
        arrays[f"m.{key}"] = state.m[key]
        arrays[f"v.{key}"] = state.v[key]
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)  # type: ignore[arg-type]
    atomic_write_bytes(path, buffer.getvalue())


def load_train_state(path: Path, seed: int) -> TrainState:
    data = read_bytes(path, "training state")
    try:
        with np.load(io.BytesIO(data), allow_pickle=False) as npz:
            stored = {k: npz[k] for k in npz.files}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise FormatError(f"{path}: unreadable training state ({e})") from e
    if "checkpoint" not in stored:
        raise FormatError(f"{path}: training state has no parameters")
    if int(stored["seed"]) != seed:
        raise ConfigError(f"{path}: saved with seed {int(stored['seed'])}, resuming with {seed}")
    params = decode_checkpoint(stored["checkpoint"].tobytes(), what=str(path))
    keys = params.to_arrays()
    try:
        m = {k: np.array(stored[f"m.{k}"], dtype=np.float64) for k in keys}
        v = {k: np.array(stored[f"v.{k}"], dtype=np.float64) for k in keys}
    except KeyError as e:
        raise FormatError(f"{path}: missing optimizer moment {e.args[0]}") from None
    return TrainState(params, m, v, int(stored["step"]), int(stored["epoch"]))


def _save(run_dir: RunDirectory, state: TrainState, seed: int) -> None:
    save_checkpoint(run_dir.checkpoint_path, state.params)
    save_train_state(run_dir.train_state_path, state, seed)
    logger.info("checkpoint written after epoch %d: %s", state.epoch, run_dir.checkpoint_path)


def _mean_breakdown(rows: Sequence[dict[str, float]]) -> dict[str, float]:
    return {t: float(np.mean([r[t] for r in rows])) for t in LOSS_TERMS}


def train(
    assays: Sequence[Assay],
    store: FeatureStore,
    config: TrainConfig,
    run_dir: RunDirectory | None = None,
    resume: bool = False,
    on_epoch: Callable[[EpochLoss], None] | None = None,
) -> TrainResult:
    """Optimise the heads over shuffled assay batches.

    Each epoch shuffles the assays and samples one candidate pocket per assay from the
    epoch's own stream. With ``run_dir`` the loss log is appended per epoch and the
    checkpoint plus training state are written every ``checkpoint_every`` epochs and at
    the end.
    """
    usable = [a for a in assays if a.ligands]
    if len(usable) < len(assays):
        logger.warning("skipping %d assay(s) without ligands", len(assays) - len(usable))
    if not usable:
        raise DataError("no assays with ligands to train on")
    validate_references(usable, store)
    buckets = resolve_buckets(config.buckets, usable)
    logger.info(
        "training on %d assays, %d features of dimension %d, seed %d",
        len(usable),
        len(store),
        store.dim,
        config.seed,
    )
    logger.info("bucket thresholds on -affinity: %s", buckets.thresholds)
    ties = count_affinity_ties(usable)
    if ties:
        logger.info("%d tied affinities keep their input order in the listwise loss", ties)
    if config.threads > 1:
        logger.info("training runs on one optimizer thread; threads=%d applies to scoring", config.threads)

    if resume:
        if run_dir is None or not run_dir.train_state_path.exists():
            raise DataError("nothing to resume: no training state in the output directory")
        state = load_train_state(run_dir.train_state_path, config.seed)
        run_dir.truncate_loss_log(state.epoch)
        logger.info("resuming after epoch %d (step %d)", state.epoch, state.step)
    else:
        params = init_params(store.dim, config.model, derive_rng(config.seed, "init"))
        state = TrainState.fresh(params)
        if run_dir is not None:
            run_dir.ensure()
            run_dir.loss_log_path.unlink(missing_ok=True)

    history: list[EpochLoss] = []
    for epoch in range(state.epoch, config.epochs):
        rng = derive_rng(config.seed, "epoch", epoch)
        order = rng.permutation(len(usable))
        choices = [int(rng.integers(len(a.pocket_feature_ids))) for a in usable]
        lr = learning_rate(config, epoch)
        rows = []
        for number, start in enumerate(range(0, len(usable), config.batch_assays), start=1):
            picked = order[start : start + config.batch_assays]
            batch = build_batch(
                [usable[i] for i in picked], store, buckets, [choices[i] for i in picked]
            )
            result = grad_total_loss(batch, state.params, config.weights)
            grads, clipped = clip_gradients(result.grads, config.grad_clip)
            if clipped:
                logger.warning(
                    "epoch %d batch %d: gradient norm %.4g clipped to %g",
                    epoch + 1,
                    number,
                    result.grads.global_norm(),
                    config.grad_clip,
                )
            state = adam_step(state, grads, config, lr)
            rows.append((epoch + 1, number, result.loss, result.breakdown))

        state = replace(state, epoch=epoch + 1)
        mean = EpochLoss(
            epoch + 1,
            float(np.mean([r[2] for r in rows])),
            _mean_breakdown([r[3] for r in rows]),
        )
        if not math.isfinite(mean.total):
            raise NumericError(f"epoch {epoch + 1} mean loss is not finite", term="total")
        history.append(mean)
        logger.info("epoch %d/%d loss %.6g", mean.epoch, config.epochs, mean.total)
        logger.debug(
            "epoch %d terms %s", mean.epoch, " ".join(f"{k}={v:.4g}" for k, v in mean.breakdown.items())
        )
        if on_epoch is not None:
            on_epoch(mean)
        if run_dir is not None:
            run_dir.append_loss_rows(rows)
            periodic = config.checkpoint_every and state.epoch % config.checkpoint_every == 0
            if periodic and state.epoch < config.epochs:
                _save(run_dir, state, config.seed)

    if run_dir is not None:
        _save(run_dir, state, config.seed)
    return TrainResult(state.params, history, state, buckets)
