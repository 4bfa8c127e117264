"""Activity-cliff pair analysis: do near-identical ligands with distant affinities separate?"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .data import CliffPair, FeatureStore
from .errors import DataError, MetricError
from .geometry import lorentz_distance
from .metrics import pearson
from .model import ModelParams, embed_with
from .models import Assay
from .storage import format_exact

CLIFF_COLUMNS = (
    "pair_id",
    "assay_id",
    "weak_score",
    "strong_score",
    "score_gap",
    "affinity_gap",
    "agrees",
    "geodesic",
    "tangent",
)


@dataclass(frozen=True)
class CliffPairResult:
    pair_id: str
    assay_id: str
    weak_score: float
    strong_score: float
    affinity_gap: float
    geodesic: float
    tangent: float

    @property
    def score_gap(self) -> float:
        return self.strong_score - self.weak_score

    @property
    def agrees(self) -> bool:
        """The score gap points the same way as the affinity gap."""
        return bool(np.sign(self.score_gap) == np.sign(self.affinity_gap) != 0)

    def cells(self) -> list[str]:
        return [
            self.pair_id,
            self.assay_id,
            format_exact(self.weak_score),
            format_exact(self.strong_score),
            format_exact(self.score_gap),
            format_exact(self.affinity_gap),
            "1" if self.agrees else "0",
            format_exact(self.geodesic),
            format_exact(self.tangent),
        ]


@dataclass(frozen=True)
class CliffSummary:
    pairs: int
    directional_accuracy: float
    gap_correlation: float | None
    mean_geodesic: float
    mean_tangent: float


def analyze_cliffs(
    pairs: Sequence[CliffPair],
    assays: Sequence[Assay],
    store: FeatureStore,
    params: ModelParams,
) -> list[CliffPairResult]:
    """Score both members of each pair against their assay's first pocket."""
    by_id = {a.assay_id: a for a in assays}
    results = []
    for pair in pairs:
        assay = by_id.get(pair.assay_id)
        if assay is None:
            raise DataError(f"pair '{pair.pair_id}' refers to unknown assay '{pair.assay_id}'")
        ligands = {lg.ligand_id: lg for lg in assay.ligands}
        try:
            weak, strong = ligands[pair.weak_ligand], ligands[pair.strong_ligand]
        except KeyError as e:
            raise DataError(f"pair '{pair.pair_id}': ligand {e.args[0]} not in '{assay.assay_id}'") from None
        if weak.affinity is None or strong.affinity is None:
            raise DataError(f"pair '{pair.pair_id}' needs affinities on both ligands")

        features = store.rows([weak.feature_id, strong.feature_id])
        points = embed_with(params, "ligand", features)
        pocket = embed_with(params, "pocket", store.row(assay.pocket_feature_ids[0]))
        scores = points.spatial @ pocket.spatial
        tangents = params.ligand_head.tangent(features)
        results.append(
            CliffPairResult(
                pair_id=pair.pair_id,
                assay_id=pair.assay_id,
                weak_score=float(scores[0]),
                strong_score=float(scores[1]),
                affinity_gap=strong.affinity - weak.affinity,
                geodesic=float(lorentz_distance(points[0], points[1], params.curvature)),
                tangent=float(np.linalg.norm(tangents[1] - tangents[0])),
            )
        )
    return results


def summarize_cliffs(results: Sequence[CliffPairResult]) -> CliffSummary:
    if not results:
        raise DataError("no cliff pairs to summarise")
    try:
        correlation: float | None = pearson(
            [r.score_gap for r in results], [r.affinity_gap for r in results]
        )
    except MetricError:
        correlation = None
    return CliffSummary(
        pairs=len(results),
        directional_accuracy=float(np.mean([r.agrees for r in results])),
        gap_correlation=correlation,
        mean_geodesic=float(np.mean([r.geodesic for r in results])),
        mean_tangent=float(np.mean([r.tangent for r in results])),
    )
