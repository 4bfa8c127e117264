"""Inference-time scoring: spatial inner products between a pocket and a ligand index."""

import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, TypeVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .data import FeatureStore
from .errors import DataError
from .log import get_logger
from .model import ModelParams, embed_with
from .models import Assay

logger = get_logger(__name__)

Array = NDArray[np.float64]
T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True, eq=False)
class LigandIndex:
    """Spatial components of embedded ligands, one row per id."""

    ids: tuple[str, ...]
    spatial: Array

    def __post_init__(self) -> None:
        if self.spatial.ndim != 2 or self.spatial.shape[0] != len(self.ids):
            raise ValueError("index rows must match ids")
        if not np.all(np.isfinite(self.spatial)):
            raise DataError("ligand index has non-finite vectors")

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, ids: Sequence[str]) -> "LigandIndex":
        position = {lid: i for i, lid in enumerate(self.ids)}
        missing = [lid for lid in ids if lid not in position]
        if missing:
            raise DataError(f"ligand '{missing[0]}' is not in the index")
        rows = [position[lid] for lid in ids]
        return LigandIndex(tuple(ids), self.spatial[rows].reshape(len(rows), -1))


class RankedEntry(NamedTuple):
    ligand_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedResult:
    """Ligands by descending score; equal scores are ordered by ascending id.

    ``dot_products`` counts the inner products evaluated to produce the scores.
    """

    entries: tuple[RankedEntry, ...]
    dot_products: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.ligand_id for e in self.entries]

    @property
    def scores(self) -> Array:
        return np.array([e.score for e in self.entries], dtype=np.float64)

    def pairs(self) -> list[tuple[str, float]]:
        return [(e.ligand_id, e.score) for e in self.entries]


class ScreenedLigand(NamedTuple):
    ligand_id: str
    score: float
    label: int
    affinity: float | None


def build_index(
    ligand_ids: Sequence[str],
    store: FeatureStore,
    params: ModelParams,
    feature_ids: Sequence[str] | None = None,
) -> LigandIndex:
    """Embed every ligand through the ligand head and keep the spatial parts.

    Features are looked up by ``feature_ids`` when given, else by the ligand ids.
    """
    seen: set[str] = set()
    for lid in ligand_ids:
        if lid in seen:
            raise DataError(f"duplicate ligand id '{lid}' in index")
        seen.add(lid)
    if not ligand_ids:
        return LigandIndex((), np.zeros((0, params.embed_dim)))
    if feature_ids is not None and len(feature_ids) != len(ligand_ids):
        raise ValueError("feature_ids must match ligand_ids")
    started = time.perf_counter()
    points = embed_with(params, "ligand", store.rows(list(feature_ids or ligand_ids)))
    index = LigandIndex(tuple(ligand_ids), np.ascontiguousarray(points.spatial))
    logger.debug("indexed %d ligands in %.3fs", len(index), time.perf_counter() - started)
    return index


def rank_scores(ids: Sequence[str], scores: ArrayLike, dot_products: int = 0) -> RankedResult:
    values = np.asarray(scores, dtype=np.float64)
    # lexsort keys: last is primary
    order = np.lexsort((np.asarray(ids, dtype=object).astype(str), -values))
    return RankedResult(
        tuple(
            RankedEntry(ids[i], float(values[i]), rank)
            for rank, i in enumerate(order.tolist(), start=1)
        ),
        dot_products,
    )


def score_all(pocket_features: ArrayLike, index: LigandIndex, params: ModelParams) -> RankedResult:
    """Score each indexed ligand by <pocket spatial, ligand spatial> and rank them."""
    if len(index) == 0:
        raise DataError("cannot score against an empty index")
    pocket = embed_with(params, "pocket", pocket_features)
    if pocket.spatial.shape[-1] != index.spatial.shape[1]:
        raise DataError(
            f"pocket embedding dimension {pocket.spatial.shape[-1]} "
            f"does not match index dimension {index.spatial.shape[1]}"
        )
    # one dot product per indexed ligand
    scores = index.spatial @ pocket.spatial
    return rank_scores(index.ids, scores, dot_products=int(scores.shape[0]))


def screen_assay(
    assay: Assay, index: LigandIndex, params: ModelParams, store: FeatureStore
) -> list[ScreenedLigand]:
    """Ranked (id, score, label, affinity) rows for one assay against its first pocket.

    ``index`` is keyed by ligand id and must hold every ligand of the assay.
    """
    by_id = {}
    for ligand in assay.ligands:
        if ligand.active is None:
            raise DataError(f"assay '{assay.assay_id}': ligand '{ligand.ligand_id}' has no label")
        by_id[ligand.ligand_id] = ligand
    library = index.subset(list(by_id))
    ranked = score_all(store.row(assay.pocket_feature_ids[0]), library, params)
    return [
        ScreenedLigand(
            entry.ligand_id,
            entry.score,
            int(bool(by_id[entry.ligand_id].active)),
            by_id[entry.ligand_id].affinity,
        )
        for entry in ranked.entries
    ]


class TargetQuery(NamedTuple):
    """One screening query: a target's pocket and the union of its assays' ligands."""

    target_id: str
    pocket_feature_id: str
    ligand_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]
    labels: tuple[int | None, ...]
    affinities: tuple[float | None, ...]

    @property
    def is_labeled(self) -> bool:
        return bool(self.labels) and all(label is not None for label in self.labels)


class _Merged:
    def __init__(self, feature_id: str) -> None:
        self.feature_id = feature_id
        self.label: int | None = None
        self.affinity: float | None = None
        self.conflicting = False

    def report(self, affinity: float | None) -> None:
        if affinity is None or self.conflicting:
            return
        if self.affinity is None:
            self.affinity = affinity
        elif self.affinity != affinity:
            self.affinity, self.conflicting = None, True


def group_by_target(assays: Sequence[Assay]) -> list[TargetQuery]:
    """Merge assays per target.

    A ligand is active if active in any assay of the target. Its affinity is the one
    its assays report, or None when they report different values.
    """
    grouped: dict[str, tuple[str, dict[str, _Merged]]] = {}
    for assay in assays:
        _, ligands = grouped.setdefault(assay.target_id, (assay.pocket_feature_ids[0], {}))
        for lg in assay.ligands:
            merged = ligands.setdefault(lg.ligand_id, _Merged(lg.feature_id))
            if merged.feature_id != lg.feature_id:
                raise DataError(
                    f"target '{assay.target_id}': ligand '{lg.ligand_id}' maps to "
                    f"features '{merged.feature_id}' and '{lg.feature_id}'"
                )
            if lg.active is not None:
                merged.label = int(bool(merged.label) or lg.active)
            merged.report(lg.affinity)
    queries = []
    for target in sorted(grouped):
        pocket, ligands = grouped[target]
        conflicts = sum(m.conflicting for m in ligands.values())
        if conflicts:
            logger.warning("target %s: %d ligands have disagreeing affinities; left unset", target, conflicts)
        ids = tuple(ligands)
        queries.append(
            TargetQuery(
                target,
                pocket,
                ids,
                tuple(ligands[i].feature_id for i in ids),
                tuple(ligands[i].label for i in ids),
                tuple(ligands[i].affinity for i in ids),
            )
        )
    return queries


def map_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Apply ``fn`` to every item; results keep input order for any thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
