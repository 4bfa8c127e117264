"""Projection heads, batched embedding and exact gradients of the training objective."""

import math
import struct
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import tape
from .data import FeatureStore
from .errors import ConfigError, DataError, FormatError, NumericError, RangeError
from .geometry import (
    LorentzPoint,
    TracedPoints,
    exp_map_origin,
    lift_spatial,
    traced_exp_map_origin,
    traced_lift,
)
from .losses import (
    LogitMatrix,
    affinity_order,
    angular_margin_reg,
    assign_buckets,
    cone_loss,
    cone_terms,
    contrastive_loss,
    contrastive_term,
    heterogeneity_groups,
    heterogeneity_reg,
    heterogeneity_term,
    listwise_rank_loss,
    positive_mask,
    ranked_listwise_term,
    total_loss,
)
from .models import LOSS_TERMS, Assay, BucketConfig, Curvature, LossWeights, ModelConfig
from .storage import ByteReader, atomic_write_bytes, read_bytes, seal, unseal
from .tape import Node

Array = NDArray[np.float64]
IntArray = NDArray[np.int64]
BoolArray = NDArray[np.bool_]

HEADS = ("pocket", "ligand", "sequence")
MAX_TANGENT_NORM = 20.0

CHECKPOINT_MAGIC = b"HYPSK1"
CHECKPOINT_VERSION = 1
FLAG_EUCLIDEAN = 1
FLAG_HIDDEN = 2
FLAG_LEARN_TAU = 4

POCKET_TERMS = ("cont_poc", "rank_poc", "cone_rad", "cone_ang", "r_ang", "r_het")


@dataclass(frozen=True, eq=False)
class ProjectionHead:
    """Affine map to the tangent space at the origin, optionally through a tanh layer."""

    weight: Array
    bias: Array
    hidden_weight: Array | None = None
    hidden_bias: Array | None = None

    def __post_init__(self) -> None:
        arrays = [self.weight, self.bias]
        if (self.hidden_weight is None) != (self.hidden_bias is None):
            raise ValueError("hidden weight and bias must be given together")
        if self.hidden_weight is not None and self.hidden_bias is not None:
            arrays += [self.hidden_weight, self.hidden_bias]
            if self.hidden_weight.shape[0] != self.hidden_bias.shape[0]:
                raise ValueError("hidden bias length must match hidden weight rows")
            if self.weight.shape[1] != self.hidden_weight.shape[0]:
                raise ValueError("weight columns must match the hidden width")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight must be (n_out, n_in) and bias (n_out,)")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise NumericError("projection head has non-finite parameters", term="params")

    @property
    def n_in(self) -> int:
        source = self.hidden_weight if self.hidden_weight is not None else self.weight
        return int(source.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weight.shape[0])

    @property
    def n_hidden(self) -> int:
        return 0 if self.hidden_weight is None else int(self.hidden_weight.shape[0])

    def arrays(self) -> dict[str, Array]:
        out = {}
        if self.hidden_weight is not None and self.hidden_bias is not None:
            out["hidden_weight"] = self.hidden_weight
            out["hidden_bias"] = self.hidden_bias
        out["weight"] = self.weight
        out["bias"] = self.bias
        return out

    def tangent(self, features: ArrayLike) -> Array:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise DataError(f"feature length {x.shape[-1]} does not match head input {self.n_in}")
        if self.hidden_weight is not None and self.hidden_bias is not None:
            x = np.tanh(x @ self.hidden_weight.T + self.hidden_bias)
        return np.asarray(x @ self.weight.T + self.bias)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """The trainable state: three heads plus the temperature; curvature stays fixed."""

    pocket_head: ProjectionHead
    ligand_head: ProjectionHead
    sequence_head: ProjectionHead
    curvature: Curvature
    tau: float
    geometry: str = "lorentz"
    learn_tau: bool = False

    def __post_init__(self) -> None:
        dims = {h.n_out for h in self.heads()}
        if len(dims) != 1:
            raise ValueError(f"heads disagree on the embedding dimension: {sorted(dims)}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise NumericError(f"temperature must be positive and finite, got {self.tau}", "tau")
        if self.geometry not in ("lorentz", "euclidean"):
            raise ValueError(f"unknown geometry '{self.geometry}'")

    def heads(self) -> tuple[ProjectionHead, ProjectionHead, ProjectionHead]:
        return self.pocket_head, self.ligand_head, self.sequence_head

    def head(self, name: str) -> ProjectionHead:
        return dict(zip(HEADS, self.heads()))[name]

    @property
    def embed_dim(self) -> int:
        return self.pocket_head.n_out

    def to_arrays(self) -> dict[str, Array]:
        """Trainable arrays keyed ``<head>.<field>`` plus ``log_tau`` when learned."""
        out = {
            f"{name}.{field}": np.array(value, dtype=np.float64)
            for name, head in zip(HEADS, self.heads())
            for field, value in head.arrays().items()
        }
        if self.learn_tau:
            out["log_tau"] = np.array(math.log(self.tau))
        return out

    def with_arrays(self, arrays: dict[str, Array]) -> "ModelParams":
        heads = []
        for name, head in zip(HEADS, self.heads()):
            fields = {f: np.array(arrays[f"{name}.{f}"], dtype=np.float64) for f in head.arrays()}
            heads.append(ProjectionHead(**fields))
        tau = float(np.exp(arrays["log_tau"])) if self.learn_tau else self.tau
        return ModelParams(*heads, self.curvature, tau, self.geometry, self.learn_tau)


@dataclass(frozen=True)
class GradientBundle:
    """Gradients keyed like ``ModelParams.to_arrays``."""

    arrays: dict[str, Array]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "GradientBundle":
        return cls({k: np.zeros_like(v) for k, v in params.to_arrays().items()})

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays.values())))

    def scaled(self, factor: float) -> "GradientBundle":
        return GradientBundle({k: g * factor for k, g in self.arrays.items()})

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(g))) for g in self.arrays.values())

    def __getitem__(self, key: str) -> Array:
        return self.arrays[key]


class LossAndGrad(NamedTuple):
    loss: float
    grads: GradientBundle
    breakdown: dict[str, float]


# Initialisation


def _identity_plus_noise(rows: int, cols: int, gain: float, std: float, rng: np.random.Generator) -> Array:
    return gain * np.eye(rows, cols) + std * rng.normal(size=(rows, cols))


def init_head(
    n_in: int, config: ModelConfig, rng: np.random.Generator
) -> ProjectionHead:
    gain, std = config.init_gain, config.init_std
    if config.hidden_dim > 0:
        return ProjectionHead(
            weight=_identity_plus_noise(config.embed_dim, config.hidden_dim, gain, std, rng),
            bias=np.zeros(config.embed_dim),
            hidden_weight=_identity_plus_noise(config.hidden_dim, n_in, gain, std, rng),
            hidden_bias=np.zeros(config.hidden_dim),
        )
    return ProjectionHead(
        weight=_identity_plus_noise(config.embed_dim, n_in, gain, std, rng),
        bias=np.zeros(config.embed_dim),
    )


def init_params(n_in: int, config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Near-identity heads; bias starts at zero."""
    heads = [init_head(n_in, config, rng) for _ in HEADS]
    return ModelParams(
        *heads,
        curvature=Curvature(kappa=config.kappa),
        tau=config.tau,
        geometry=config.geometry,
        learn_tau=config.learn_tau,
    )


# Embedding


def _check_range(tangent: Array, name: str) -> None:
    norms = np.linalg.norm(tangent, axis=-1)
    if np.any(~np.isfinite(norms)) or np.any(norms > MAX_TANGENT_NORM):
        worst = float(np.max(norms))
        raise RangeError(
            f"{name} head produced a tangent vector of norm {worst:.4g} "
            f"(limit {MAX_TANGENT_NORM:g})",
            term=name,
        )


def embed(
    features: ArrayLike,
    head: ProjectionHead,
    curvature: Curvature | float = 1.0,
    geometry: str = "lorentz",
    name: str = "head",
) -> LorentzPoint:
    """Lift features through a head: affine map, then the exponential map at the origin."""
    v = head.tangent(features)
    _check_range(v, name)
    if geometry == "euclidean":
        return lift_spatial(v, curvature)
    return exp_map_origin(v, curvature)


def embed_with(params: ModelParams, name: str, features: ArrayLike) -> LorentzPoint:
    return embed(features, params.head(name), params.curvature, params.geometry, name)


# Batches


@dataclass(frozen=True, eq=False)
class AssayBatch:
    """Feature blocks of a set of assays; ligands are stored assay after assay."""

    assay_ids: tuple[str, ...]
    pocket_features: Array
    sequence_features: Array
    has_sequence: BoolArray
    ligand_features: Array
    assay_index: IntArray
    active: BoolArray
    affinity: Array
    buckets: IntArray
    rankings: tuple[IntArray, ...]
    bucket_config: BucketConfig

    @property
    def n_assays(self) -> int:
        return len(self.assay_ids)

    @property
    def n_ligands(self) -> int:
        return int(self.ligand_features.shape[0])

    def permuted(self, order: Sequence[int]) -> "AssayBatch":
        """Same batch with assays (and their ligand blocks) in a new order."""
        order = list(order)
        columns = np.concatenate(
            [np.flatnonzero(self.assay_index == i) for i in order] or [np.zeros(0, dtype=np.int64)]
        ).astype(np.int64)
        new_row = {old: new for new, old in enumerate(order)}
        new_col = np.empty(self.n_ligands, dtype=np.int64)
        new_col[columns] = np.arange(columns.size)
        return AssayBatch(
            assay_ids=tuple(self.assay_ids[i] for i in order),
            pocket_features=self.pocket_features[order],
            sequence_features=self.sequence_features[order],
            has_sequence=self.has_sequence[order],
            ligand_features=self.ligand_features[columns],
            assay_index=np.array([new_row[int(i)] for i in self.assay_index[columns]], dtype=np.int64),
            active=self.active[columns],
            affinity=self.affinity[columns],
            buckets=self.buckets[columns],
            rankings=tuple(new_col[self.rankings[i]] for i in order),
            bucket_config=self.bucket_config,
        )

    def without_sequences(self) -> "AssayBatch":
        return AssayBatch(
            assay_ids=self.assay_ids,
            pocket_features=self.pocket_features,
            sequence_features=np.zeros_like(self.sequence_features),
            has_sequence=np.zeros_like(self.has_sequence),
            ligand_features=self.ligand_features,
            assay_index=self.assay_index,
            active=self.active,
            affinity=self.affinity,
            buckets=self.buckets,
            rankings=self.rankings,
            bucket_config=self.bucket_config,
        )


def build_batch(
    assays: Sequence[Assay],
    store: FeatureStore,
    bucket_config: BucketConfig,
    pocket_choice: Sequence[int] | None = None,
) -> AssayBatch:
    """Resolve the features of ``assays``; ``pocket_choice[i]`` picks assay i's pocket."""
    if not assays:
        raise DataError("a batch needs at least one assay")
    if pocket_choice is None:
        pocket_choice = [0] * len(assays)
    pockets, sequences, has_sequence = [], [], []
    ligand_ids: list[str] = []
    owners: list[int] = []
    active: list[bool] = []
    affinity: list[float] = []
    for i, (assay, choice) in enumerate(zip(assays, pocket_choice)):
        pockets.append(store.row(assay.pocket_feature_ids[choice]))
        if assay.sequence_feature_id is not None:
            sequences.append(store.row(assay.sequence_feature_id))
            has_sequence.append(True)
        else:
            sequences.append(np.zeros(store.dim))
            has_sequence.append(False)
        for ligand in assay.ligands:
            ligand_ids.append(ligand.feature_id)
            owners.append(i)
            active.append(bool(ligand.active))
            affinity.append(np.nan if ligand.affinity is None else ligand.affinity)

    affinity_arr = np.asarray(affinity, dtype=np.float64)
    owners_arr = np.asarray(owners, dtype=np.int64)
    bucketed = np.isfinite(affinity_arr)
    buckets = np.full(len(affinity), -1, dtype=np.int64)
    if bucketed.any():
        buckets[bucketed] = assign_buckets(-affinity_arr[bucketed], bucket_config)
    rankings = []
    for i in range(len(assays)):
        columns = np.flatnonzero(owners_arr == i)
        rankings.append(columns[affinity_order(affinity_arr[columns])])
    return AssayBatch(
        assay_ids=tuple(a.assay_id for a in assays),
        pocket_features=np.asarray(pockets, dtype=np.float64),
        sequence_features=np.asarray(sequences, dtype=np.float64),
        has_sequence=np.asarray(has_sequence, dtype=bool),
        ligand_features=store.rows(ligand_ids),
        assay_index=owners_arr,
        active=np.asarray(active, dtype=bool),
        affinity=affinity_arr,
        buckets=buckets,
        rankings=tuple(rankings),
        bucket_config=bucket_config,
    )


# Objective


class Forward(NamedTuple):
    total: Node
    terms: dict[str, Node]
    leaves: dict[str, Node]


def _traced_head(name: str, x: Array, leaves: dict[str, Node], head: ProjectionHead) -> Node:
    if x.shape[-1] != head.n_in:
        raise DataError(f"feature length {x.shape[-1]} does not match {name} head input {head.n_in}")
    h: Node = tape.constant(x)
    if head.hidden_weight is not None:
        h = tape.tanh(h @ leaves[f"{name}.hidden_weight"].T + leaves[f"{name}.hidden_bias"])
    v = h @ leaves[f"{name}.weight"].T + leaves[f"{name}.bias"]
    _check_range(v.value, name)
    return v


def _traced_points(v: Node, params: ModelParams) -> TracedPoints:
    if params.geometry == "euclidean":
        return traced_lift(v, params.curvature.kappa)
    return traced_exp_map_origin(v, params.curvature.kappa)


def _tower_rankings(batch: AssayBatch, rows: IntArray) -> list[tuple[int, IntArray]]:
    return [(position, batch.rankings[int(row)]) for position, row in enumerate(rows)]


def forward(
    batch: AssayBatch, params: ModelParams, weights: LossWeights, track: bool = False
) -> Forward:
    """Build the objective graph; terms with a zero coefficient are not evaluated."""
    if batch.n_assays == 0 or batch.n_ligands == 0:
        raise DataError("empty batch")
    arrays = params.to_arrays()
    make = tape.variable if track else tape.constant
    leaves = {key: make(value) for key, value in arrays.items()}
    coef = weights.coefficients()
    kappa = params.curvature.kappa
    inv_tau: Node = (
        tape.exp(-leaves["log_tau"]) if "log_tau" in leaves else tape.constant(1.0 / params.tau)
    )
    terms: dict[str, Node] = {}

    def points(name: str, x: Array) -> TracedPoints:
        return _traced_points(_traced_head(name, x, leaves, params.head(name)), params)

    ligands = points("ligand", batch.ligand_features)
    all_rows = np.arange(batch.n_assays)

    if any(coef[t] > 0 for t in POCKET_TERMS):
        pockets = points("pocket", batch.pocket_features)
        logits = (pockets.spatial @ ligands.spatial.T) * inv_tau
        if coef["cont_poc"] > 0:
            mask = positive_mask(batch.assay_index, batch.active, batch.n_assays)
            terms["cont_poc"] = contrastive_term(logits, mask)
        if coef["rank_poc"] > 0:
            terms["rank_poc"] = ranked_listwise_term(logits, _tower_rankings(batch, all_rows))
        if any(coef[t] > 0 for t in ("cone_rad", "cone_ang", "r_ang")):
            pairs = np.flatnonzero(batch.buckets >= 0)
            cone = cone_terms(
                pockets,
                ligands.take(pairs),
                batch.assay_index[pairs],
                batch.buckets[pairs],
                batch.bucket_config,
                kappa,
                weights.margin,
            )
            if coef["cone_rad"] > 0:
                terms["cone_rad"] = cone.rad
            if coef["cone_ang"] > 0:
                terms["cone_ang"] = cone.ang
            if coef["r_ang"] > 0:
                terms["r_ang"] = cone.reg
        if coef["r_het"] > 0:
            groups = heterogeneity_groups(
                batch.assay_index,
                batch.active,
                batch.affinity,
                batch.n_assays,
                weights.affinity_threshold,
            )
            terms["r_het"] = heterogeneity_term(logits, groups)

    rows = np.flatnonzero(batch.has_sequence)
    if rows.size > 0 and (coef["cont_seq"] > 0 or coef["rank_seq"] > 0):
        sequences = points("sequence", batch.sequence_features[rows])
        seq_logits = (sequences.spatial @ ligands.spatial.T) * inv_tau
        if coef["cont_seq"] > 0:
            mask = positive_mask(batch.assay_index, batch.active, batch.n_assays)[rows]
            terms["cont_seq"] = contrastive_term(seq_logits, mask)
        if coef["rank_seq"] > 0:
            terms["rank_seq"] = ranked_listwise_term(seq_logits, _tower_rankings(batch, rows))

    total: Node = tape.constant(0.0)
    for name in LOSS_TERMS:
        if name not in terms:
            continue
        value = terms[name].value
        if not np.all(np.isfinite(value)):
            raise NumericError(f"loss term '{name}' is not finite ({float(value)})", term=name)
        total = total + terms[name] * coef[name]
    return Forward(total, terms, leaves)


def _breakdown(terms: dict[str, Node]) -> dict[str, float]:
    return {name: terms[name].item() if name in terms else 0.0 for name in LOSS_TERMS}


def grad_total_loss(batch: AssayBatch, params: ModelParams, weights: LossWeights) -> LossAndGrad:
    """Objective value, reverse-mode gradients and the per-term breakdown."""
    fwd = forward(batch, params, weights, track=True)
    fwd.total.backward()
    grads = {}
    for key, leaf in fwd.leaves.items():
        grad = np.zeros_like(leaf.value) if leaf.grad is None else leaf.grad
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"gradient of '{key}' is not finite", term=f"gradient:{key}")
        grads[key] = grad
    return LossAndGrad(fwd.total.item(), GradientBundle(grads), _breakdown(fwd.terms))


def loss_value(batch: AssayBatch, params: ModelParams, weights: LossWeights) -> float:
    return forward(batch, params, weights, track=False).total.item()


def evaluate_loss(
    batch: AssayBatch, params: ModelParams, weights: LossWeights
) -> tuple[float, dict[str, float]]:
    """The objective recomputed through the public numpy loss functions."""
    coef = weights.coefficients()
    kappa = params.curvature
    ligands = embed_with(params, "ligand", batch.ligand_features)
    terms: dict[str, float] = {}

    def tower(prefix: str, rows: IntArray, queries: LorentzPoint) -> None:
        logits = LogitMatrix.from_embeddings(queries.spatial, ligands.spatial, params.tau)
        positives = [
            np.flatnonzero((batch.assay_index == row) & batch.active).tolist() for row in rows
        ]
        if coef[f"cont_{prefix}"] > 0:
            terms[f"cont_{prefix}"] = contrastive_loss(logits, positives)
        if coef[f"rank_{prefix}"] > 0:
            terms[f"rank_{prefix}"] = sum(
                listwise_rank_loss(logits.values[i, batch.rankings[int(row)]])
                for i, row in enumerate(rows)
                if len(batch.rankings[int(row)]) > 0
            )

    rows = np.arange(batch.n_assays)
    if any(coef[t] > 0 for t in POCKET_TERMS):
        pockets = embed_with(params, "pocket", batch.pocket_features)
        tower("poc", rows, pockets)
        pairs = np.flatnonzero(batch.buckets >= 0)
        owners, buckets = batch.assay_index[pairs], batch.buckets[pairs]
        if coef["cone_rad"] > 0 or coef["cone_ang"] > 0:
            cone = cone_loss(pockets, ligands[pairs], owners, buckets, batch.bucket_config, weights, kappa)
            terms["cone_rad"], terms["cone_ang"] = cone.rad, cone.ang
        if coef["r_ang"] > 0:
            terms["r_ang"] = angular_margin_reg(
                pockets, ligands[pairs], owners, buckets, batch.bucket_config, weights.margin, kappa
            )
        if coef["r_het"] > 0:
            logits = LogitMatrix.from_embeddings(pockets.spatial, ligands.spatial, params.tau)
            per_assay = [
                np.flatnonzero((batch.assay_index == row) & batch.active) for row in rows
            ]
            terms["r_het"] = heterogeneity_reg(
                [logits.values[row, cols] for row, cols in zip(rows, per_assay)],
                [batch.affinity[cols] for cols in per_assay],
                weights.affinity_threshold,
            )
    seq_rows = np.flatnonzero(batch.has_sequence)
    if seq_rows.size > 0 and (coef["cont_seq"] > 0 or coef["rank_seq"] > 0):
        sequences = embed_with(params, "sequence", batch.sequence_features[seq_rows])
        tower("seq", seq_rows, sequences)
    return total_loss(terms, weights)


# Finite differences


def max_relative_error(
    fn: Callable[[dict[str, Array]], float],
    arrays: dict[str, Array],
    analytic: dict[str, Array],
    h: float = 1e-4,
) -> float:
    """Worst |a - n| / max(|a|, |n|, 1e-8) over every entry, n by central differences."""
    if not 1e-6 <= h <= 1e-3:
        raise ConfigError(f"finite-difference step must lie in [1e-6, 1e-3], got {h}")
    worst = 0.0
    for key, base in arrays.items():
        for idx in np.ndindex(base.shape):
            plus = {k: v.copy() for k, v in arrays.items()}
            minus = {k: v.copy() for k, v in arrays.items()}
            plus[key][idx] += h
            minus[key][idx] -= h
            numeric = (fn(plus) - fn(minus)) / (2.0 * h)
            exact = float(analytic[key][idx])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            worst = max(worst, error)
    return worst


def finite_diff_check(
    batch: AssayBatch,
    params: ModelParams,
    weights: LossWeights,
    h: float = 1e-4,
    analytic: GradientBundle | None = None,
) -> float:
    """Compare reverse-mode gradients (or ``analytic``) against central differences."""
    if analytic is None:
        analytic = grad_total_loss(batch, params, weights).grads
    return max_relative_error(
        lambda arrays: loss_value(batch, params.with_arrays(arrays), weights),
        params.to_arrays(),
        analytic.arrays,
        h,
    )


# Checkpoint


def encode_checkpoint(params: ModelParams) -> bytes:
    flags = 0
    if params.geometry == "euclidean":
        flags |= FLAG_EUCLIDEAN
    if any(h.n_hidden for h in params.heads()):
        flags |= FLAG_HIDDEN
    if params.learn_tau:
        flags |= FLAG_LEARN_TAU
    body = bytearray(struct.pack("<IIdd", CHECKPOINT_VERSION, flags, params.curvature.kappa, params.tau))
    for head in params.heads():
        body += struct.pack("<III", head.n_in, head.n_hidden, head.n_out)
    for head in params.heads():
        for value in head.arrays().values():
            body += np.ascontiguousarray(value, dtype="<f8").tobytes()
    return seal(CHECKPOINT_MAGIC, bytes(body))


def decode_checkpoint(data: bytes, what: str = "checkpoint") -> ModelParams:
    reader = ByteReader(unseal(data, CHECKPOINT_MAGIC, what), what)
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{what}: unsupported version {version}")
    flags = reader.u32()
    if flags & ~(FLAG_EUCLIDEAN | FLAG_HIDDEN | FLAG_LEARN_TAU):
        raise FormatError(f"{what}: unknown flags {flags:#x}")
    kappa, tau = reader.f64(), reader.f64()
    shapes = [(reader.u32(), reader.u32(), reader.u32()) for _ in HEADS]
    heads = []
    for n_in, n_hidden, n_out in shapes:
        fields: dict[str, Array] = {}
        width = n_in
        if n_hidden:
            fields["hidden_weight"] = reader.array("<f8", n_hidden * n_in).reshape(n_hidden, n_in)
            fields["hidden_bias"] = reader.array("<f8", n_hidden)
            width = n_hidden
        fields["weight"] = reader.array("<f8", n_out * width).reshape(n_out, width)
        fields["bias"] = reader.array("<f8", n_out)
        heads.append(ProjectionHead(**fields))
    reader.finish()
    try:
        return ModelParams(
            *heads,
            curvature=Curvature(kappa=kappa),
            tau=tau,
            geometry="euclidean" if flags & FLAG_EUCLIDEAN else "lorentz",
            learn_tau=bool(flags & FLAG_LEARN_TAU),
        )
    except (ValueError, NumericError) as e:
        raise FormatError(f"{what}: inconsistent parameters ({e})") from e


def save_checkpoint(path: Path, params: ModelParams) -> None:
    atomic_write_bytes(path, encode_checkpoint(params))


def load_checkpoint(path: Path) -> ModelParams:
    return decode_checkpoint(read_bytes(path, "checkpoint"), what=str(path))
