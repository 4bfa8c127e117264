"""Training-signal terms of the hyperbolic screening objective.

Each term exists twice: a ``*_term`` function over tape nodes used by the model
for gradients, and a public numpy function that evaluates the same node code on
constants. Natural logarithms throughout.
"""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import tape
from .errors import GeometryError, NumericError
from .geometry import (
    MIN_POCKET_NORM,
    MIN_SEPARATION,
    CurvatureLike,
    LorentzPoint,
    TracedPoints,
    _kappa,
    traced_distance,
    traced_exterior_angle,
    traced_half_aperture,
)
from .models import LOSS_TERMS, BucketConfig, LossWeights
from .tape import Node

Array = NDArray[np.float64]
IntArray = NDArray[np.int64]
BoolArray = NDArray[np.bool_]


@dataclass(frozen=True)
class LogitMatrix:
    """Similarity logits: rows are query assays, columns candidate ligands."""

    values: Array
    tau: float

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if not np.all(np.isfinite(self.values)):
            raise NumericError("logit matrix has non-finite entries", term="logits")

    @classmethod
    def from_embeddings(
        cls, query_spatial: ArrayLike, ligand_spatial: ArrayLike, tau: float
    ) -> "LogitMatrix":
        q = np.asarray(query_spatial, dtype=np.float64)
        m = np.asarray(ligand_spatial, dtype=np.float64)
        return cls(values=(q @ m.T) / tau, tau=float(tau))

    @property
    def shape(self) -> tuple[int, int]:
        rows, cols = self.values.shape
        return rows, cols


class ConeLoss(NamedTuple):
    rad: float
    ang: float
    combined: float


class ConeTerms(NamedTuple):
    rad: Node
    ang: Node
    reg: Node


@dataclass(frozen=True)
class HeterogeneityGroup:
    """The active set of one assay: logit row, active columns and per-column weights."""

    row: int
    columns: IntArray
    weights: Array


# contrastive


def positive_mask(assay_index: IntArray, active: BoolArray, n_assays: int) -> BoolArray:
    """(assays, ligands) mask of each assay's own actives."""
    rows = np.arange(n_assays)[:, None]
    return (np.asarray(assay_index)[None, :] == rows) & np.asarray(active, dtype=bool)[None, :]


def _contrastive_parts(logits: Node, positives: BoolArray) -> tuple[Node, Node]:
    mask = positives.astype(np.float64)
    counts = mask.sum(axis=1)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    row = -tape.sum_(tape.log_softmax(logits, axis=1) * mask, axis=1) * inv
    col = -tape.sum_(tape.log_softmax(logits, axis=0) * mask, axis=1) * inv
    return row, col


def contrastive_term(logits: Node, positives: BoolArray) -> Node:
    row, col = _contrastive_parts(logits, positives)
    return tape.sum_(row + col) * 0.5


def _positives_matrix(shape: tuple[int, int], positives: Sequence[Iterable[int]]) -> BoolArray:
    rows, cols = shape
    if len(positives) != rows:
        raise ValueError(f"expected {rows} positive sets, got {len(positives)}")
    mask = np.zeros(shape, dtype=bool)
    for i, cols_i in enumerate(positives):
        for j in cols_i:
            if not 0 <= j < cols:
                raise ValueError(f"positive column {j} out of range for row {i}")
            mask[i, j] = True
    return mask


def _logit_values(logits: LogitMatrix | ArrayLike) -> Array:
    values = logits.values if isinstance(logits, LogitMatrix) else np.asarray(logits, float)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("contrastive loss needs a non-empty logit matrix")
    return values


def contrastive_components(
    logits: LogitMatrix | ArrayLike, positives: Sequence[Iterable[int]]
) -> tuple[Array, Array]:
    """Per-row query-to-ligand and ligand-to-query terms (0 for rows without positives)."""
    values = _logit_values(logits)
    mask = _positives_matrix(values.shape, positives)  # type: ignore[arg-type]
    row, col = _contrastive_parts(tape.constant(values), mask)
    return row.value, col.value


def contrastive_loss(logits: LogitMatrix | ArrayLike, positives: Sequence[Iterable[int]]) -> float:
    """Symmetric in-batch InfoNCE summed over rows with at least one positive."""
    values = _logit_values(logits)
    mask = _positives_matrix(values.shape, positives)  # type: ignore[arg-type]
    return contrastive_term(tape.constant(values), mask).item()


# listwise


def listwise_decay(length: int) -> Array:
    k = np.arange(1, length + 1, dtype=np.float64)
    return 1.0 / (np.sqrt(length) * np.log(k + 1.0))


def listwise_term(scores: Node) -> Node:
    """Plackett-Luce negative log-likelihood of a list already sorted strongest first."""
    length = scores.shape[0]
    if length == 0:
        raise ValueError("listwise loss needs at least one score")
    log_p = scores - tape.suffix_logsumexp(scores)
    return -tape.sum_(log_p * listwise_decay(length))


def ranked_listwise_term(logits: Node, rankings: Sequence[tuple[int, IntArray]]) -> Node:
    """Sum of listwise terms over (row, columns strongest first) pairs."""
    total: Node = tape.constant(0.0)
    for row, columns in rankings:
        if len(columns) > 0:
            total = total + listwise_term(logits[row, columns])
    return total


def listwise_rank_loss(scores: ArrayLike) -> float:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    return listwise_term(tape.constant(arr)).item()


def affinity_order(affinities: ArrayLike) -> IntArray:
    """Indices of finite affinities, strongest first; ties keep input order."""
    aff = np.asarray(affinities, dtype=np.float64)
    finite = np.flatnonzero(np.isfinite(aff))
    order = np.argsort(-aff[finite], kind="stable")
    return finite[order].astype(np.int64)


# buckets


def quartile_thresholds(keys: ArrayLike) -> tuple[float, ...]:
    """(min, Q1, Q2, Q3) of the bucket keys, duplicates removed."""
    arr = np.asarray(keys, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        raise ValueError("no finite bucket keys to derive thresholds from")
    cuts = np.quantile(arr, [0.0, 0.25, 0.5, 0.75])
    return tuple(float(c) for c in np.unique(cuts))


def assign_buckets(values: ArrayLike, config: BucketConfig) -> IntArray:
    """Bucket k holds values in [t_k, t_{k+1}); out-of-range values clamp to 0 or K."""
    if config.thresholds is None:
        raise ValueError("bucket thresholds are unresolved; derive them from training keys first")
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bucket keys must be finite")
    edges = np.asarray(config.thresholds, dtype=np.float64)
    buckets = np.searchsorted(edges, arr, side="right") - 1
    return np.clip(buckets, 0, config.tiers).astype(np.int64)


def radius_caps(buckets: IntArray, config: BucketConfig) -> Array:
    return config.base_radius + np.asarray(buckets, dtype=np.float64) * config.radius_step


def angle_scales(buckets: IntArray, config: BucketConfig) -> Array:
    return config.base_angle_scale - np.asarray(buckets, dtype=np.float64) * config.angle_step


# cone hierarchy


def cone_terms(
    pockets: TracedPoints,
    ligands: TracedPoints,
    assay_index: IntArray,
    buckets: IntArray,
    config: BucketConfig,
    kappa: float,
    margin: float,
) -> ConeTerms:
    """Radial hinge, angular hinge and angular-margin hinge, each scaled by 1/sqrt(N)."""
    count = len(assay_index)
    if count == 0:
        zero = tape.constant(0.0)
        return ConeTerms(zero, zero, zero)
    owner = pockets.take(np.asarray(assay_index))
    if np.any(np.linalg.norm(owner.spatial.value, axis=-1) <= MIN_POCKET_NORM):
        raise GeometryError("pocket at the origin", term="cone")
    dist = traced_distance(owner, ligands, kappa)
    if np.any(dist.value <= MIN_SEPARATION):
        raise GeometryError("ligand coincides with its pocket", term="cone")
    phi = traced_exterior_angle(owner, ligands, kappa)
    omega = traced_half_aperture(owner, config.aperture_r0, kappa)

    scale = 1.0 / np.sqrt(count)
    excess = phi - omega * angle_scales(buckets, config)
    rad = tape.sum_(tape.relu(dist - radius_caps(buckets, config))) * scale
    ang = tape.sum_(tape.relu(excess)) * scale
    reg = tape.sum_(tape.relu(excess + margin)) * scale
    return ConeTerms(rad, ang, reg)


def _traced(points: LorentzPoint) -> TracedPoints:
    return TracedPoints(tape.constant(points.time), tape.constant(points.spatial))


def cone_loss(
    pocket_points: LorentzPoint,
    ligand_points: LorentzPoint,
    assay_index: ArrayLike,
    buckets: ArrayLike,
    config: BucketConfig,
    weights: LossWeights,
    curvature: CurvatureLike = 1.0,
) -> ConeLoss:
    terms = cone_terms(
        _traced(pocket_points),
        _traced(ligand_points),
        np.asarray(assay_index, dtype=np.int64),
        np.asarray(buckets, dtype=np.int64),
        config,
        _kappa(curvature),
        margin=0.0,
    )
    rad, ang = terms.rad.item(), terms.ang.item()
    return ConeLoss(rad, ang, weights.lambda_rad * rad + weights.lambda_ang_cone * ang)


def angular_margin_reg(
    pocket_points: LorentzPoint,
    ligand_points: LorentzPoint,
    assay_index: ArrayLike,
    buckets: ArrayLike,
    config: BucketConfig,
    margin: float,
    curvature: CurvatureLike = 1.0,
) -> float:
    terms = cone_terms(
        _traced(pocket_points),
        _traced(ligand_points),
        np.asarray(assay_index, dtype=np.int64),
        np.asarray(buckets, dtype=np.int64),
        config,
        _kappa(curvature),
        margin=margin,
    )
    return terms.reg.item()


# heterogeneity


def heterogeneity_weights(affinities: ArrayLike, threshold: float | None) -> Array:
    """1/log2(rank + 1) for actives passing v < threshold, 0 for the rest.

    Ranks are 1-based positions by affinity, strongest first; missing affinities rank last.
    """
    aff = np.asarray(affinities, dtype=np.float64)
    order = np.argsort(-aff, kind="stable")
    ranks = np.empty(aff.shape[0], dtype=np.float64)
    ranks[order] = np.arange(1, aff.shape[0] + 1)
    weights = 1.0 / np.log2(ranks + 1.0)
    if threshold is None:
        return weights
    with np.errstate(invalid="ignore"):
        selected = aff < threshold
    return np.where(selected, weights, 0.0)


def heterogeneity_term(logits: Node, groups: Sequence[HeterogeneityGroup]) -> Node:
    total: Node = tape.constant(0.0)
    for group in groups:
        log_p = tape.log_softmax(logits[group.row, group.columns], axis=0)
        total = total - tape.sum_(log_p * group.weights)
    return total * (1.0 / max(len(groups), 1))


def heterogeneity_groups(
    assay_index: IntArray,
    active: BoolArray,
    affinity: Array,
    n_assays: int,
    threshold: float | None,
) -> list[HeterogeneityGroup]:
    groups = []
    for row in range(n_assays):
        columns = np.flatnonzero((assay_index == row) & active)
        if columns.size == 0:
            continue
        groups.append(
            HeterogeneityGroup(row, columns, heterogeneity_weights(affinity[columns], threshold))
        )
    return groups


def heterogeneity_reg(
    assay_logits: Sequence[ArrayLike],
    assay_affinities: Sequence[ArrayLike],
    threshold: float | None,
) -> float:
    """Rank-weighted softmax penalty over each assay's actives, averaged over assays."""
    if len(assay_logits) != len(assay_affinities):
        raise ValueError("one affinity vector per assay is required")
    rows = [np.asarray(x, dtype=np.float64).ravel() for x in assay_logits]
    width = max((r.size for r in rows), default=0)
    padded = np.zeros((len(rows), max(width, 1)))
    groups = []
    for i, (row, aff) in enumerate(zip(rows, assay_affinities)):
        if row.size == 0:
            continue
        padded[i, : row.size] = row
        groups.append(
            HeterogeneityGroup(i, np.arange(row.size), heterogeneity_weights(aff, threshold))
        )
    return heterogeneity_term(tape.constant(padded), groups).item()


# total


def total_loss(terms: Mapping[str, float], weights: LossWeights) -> tuple[float, dict[str, float]]:
    """Weighted objective and the per-term breakdown.

    Terms with a zero coefficient are reported as 0.0 and never checked.
    """
    unknown = set(terms) - set(LOSS_TERMS)
    if unknown:
        raise ValueError(f"unknown loss terms: {sorted(unknown)}")
    coefficients = weights.coefficients()
    breakdown: dict[str, float] = {}
    total = 0.0
    for name in LOSS_TERMS:
        if coefficients[name] == 0:
            breakdown[name] = 0.0
            continue
        value = float(terms.get(name, 0.0))
        if not np.isfinite(value):
            raise NumericError(f"loss term '{name}' is not finite ({value})", term=name)
        breakdown[name] = value
        total += coefficients[name] * value
    return total, breakdown
