"""Virtual-screening and affinity-ranking metrics.

Ranks are 1-based positions after sorting by descending score; equal scores are
ordered by ascending id (or input position when no ids are given). BEDROC, EF and
RE depend on that order; AUROC counts tied active/inactive pairs as one half.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import rankdata

from .errors import MetricError

Array = NDArray[np.float64]

BEDROC_ALPHA = 80.5
EF_PERCENTS = (0.5, 1.0, 2.0, 5.0)
RE_PERCENTS = (0.5, 1.0, 2.0, 5.0)
REVariant = Literal["interpolated", "inactive_count", "library_size"]


def _label(value: float) -> str:
    return f"{value:g}"


EVALUATION_COLUMNS = (
    "AUROC",
    f"BEDROC{_label(BEDROC_ALPHA)}",
    *(f"EF{_label(p)}" for p in EF_PERCENTS),
    *(f"RE{_label(p)}" for p in RE_PERCENTS),
    "Pearson",
    "Spearman",
)
RANKING_COLUMNS = ("n", "Pearson", "Spearman")
UNDEFINED = "undefined"


@dataclass(frozen=True, eq=False)
class LabeledRanking:
    """Scores with binary labels and, optionally, affinities and tie-break ids."""

    scores: Array
    labels: NDArray[np.bool_]
    affinities: Array | None = None
    ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels).astype(bool)
        if scores.ndim != 1 or scores.shape != labels.shape:
            raise ValueError("scores and labels must be vectors of equal length")
        if self.affinities is not None and np.shape(self.affinities) != scores.shape:
            raise ValueError("affinities must match the scores")
        if self.ids is not None and len(self.ids) != scores.size:
            raise ValueError("ids must match the scores")
        if not np.all(np.isfinite(scores)):
            raise MetricError("scores must be finite", term="scores")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of(
        cls,
        scores: ArrayLike,
        labels: ArrayLike,
        affinities: ArrayLike | None = None,
        ids: Sequence[str] | None = None,
    ) -> "LabeledRanking":
        aff = None if affinities is None else np.asarray(affinities, dtype=np.float64)
        return cls(
            np.asarray(scores, dtype=np.float64),
            np.asarray(labels),
            aff,
            None if ids is None else tuple(ids),
        )

    @property
    def size(self) -> int:
        return int(self.scores.size)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return self.size - self.positives

    def order(self) -> NDArray[np.int64]:
        tie = np.arange(self.size) if self.ids is None else np.asarray(self.ids, dtype=str)
        return np.lexsort((tie, -self.scores)).astype(np.int64)

    def ranked_labels(self) -> NDArray[np.bool_]:
        return self.labels[self.order()]

    def require_both_classes(self, metric: str) -> None:
        if self.positives == 0 or self.negatives == 0:
            raise MetricError(f"{metric} needs at least one active and one inactive", term=metric)


def auroc(data: LabeledRanking) -> float:
    """Mann-Whitney estimate of P[score(active) > score(inactive)]."""
    data.require_both_classes("AUROC")
    ranks = rankdata(data.scores, method="average")
    p, n = data.positives, data.negatives
    return float((ranks[data.labels].sum() - p * (p + 1) / 2.0) / (p * n))


def bedroc(data: LabeledRanking, alpha: float = BEDROC_ALPHA) -> float:
    """Boltzmann-enhanced ROC with early-recognition focus ``alpha``."""
    data.require_both_classes("BEDROC")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n = data.size
    ranks = np.flatnonzero(data.ranked_labels()).astype(np.float64) + 1.0
    ra = data.positives / n
    observed = float(np.exp(-alpha * ranks / n).sum())
    expected = ra * (1.0 - math.exp(-alpha)) / (math.exp(alpha / n) - 1.0)
    rie = observed / expected
    scale = ra * math.sinh(alpha / 2.0) / (math.cosh(alpha / 2.0) - math.cosh(alpha / 2.0 - alpha * ra))
    value = rie * scale + 1.0 / (1.0 - math.exp(alpha * (1.0 - ra)))
    return min(1.0, max(0.0, value))


def enrichment_factor(data: LabeledRanking, alpha_percent: float) -> float:
    """Actives in the top ceil(alpha% * N) over the random expectation."""
    if not 0 < alpha_percent <= 100:
        raise ValueError(f"alpha_percent must lie in (0, 100], got {alpha_percent}")
    if data.positives == 0:
        raise MetricError("EF needs at least one active", term="EF")
    cutoff = max(1, math.ceil(alpha_percent * data.size / 100.0 - 1e-9))
    found = int(data.ranked_labels()[:cutoff].sum())
    return found / (data.positives * alpha_percent / 100.0)


def _actives_before_inactive(ranked: NDArray[np.bool_], k: int) -> int:
    """Actives ranked ahead of the (k+1)-th inactive (all actives when k reaches the end)."""
    inactive_at = np.flatnonzero(~ranked)
    if k >= inactive_at.size:
        return int(ranked.sum())
    return int(ranked[: inactive_at[k]].sum())


def true_positive_rate_at(data: LabeledRanking, fpr: float) -> float:
    """TPR read off the ROC curve of the ranking at false-positive rate ``fpr``.

    The curve has only vertical and horizontal segments, so interpolation between
    vertices is constant along each inactive; at a vertical segment the upper end is
    taken.
    """
    data.require_both_classes("RE")
    k = math.floor(fpr * data.negatives + 1e-9)
    return _actives_before_inactive(data.ranked_labels(), k) / data.positives


def roc_enrichment(
    data: LabeledRanking, x_percent: float, variant: REVariant = "interpolated"
) -> float:
    """TPR at FPR = x% divided by x%.

    ``inactive_count`` and ``library_size`` use discrete counts instead: FP is the
    first ceil(x% * inactives) inactives, normalised by the inactive count or by the
    library size.
    """
    if not 0 < x_percent <= 100:
        raise ValueError(f"x_percent must lie in (0, 100], got {x_percent}")
    data.require_both_classes("RE")
    x = x_percent / 100.0
    if variant == "interpolated":
        return true_positive_rate_at(data, x) / x
    fp = max(1, math.ceil(x * data.negatives - 1e-9))
    tp = _actives_before_inactive(data.ranked_labels(), fp - 1)
    denominator = data.negatives if variant == "inactive_count" else data.size
    return (tp / data.positives) / (fp / denominator)


def _vectors(x: ArrayLike, y: ArrayLike, metric: str) -> tuple[Array, Array]:
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"{metric} needs vectors of equal length")
    if a.size < 2:
        raise MetricError(f"{metric} needs at least two values", term=metric)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MetricError(f"{metric} needs finite values", term=metric)
    return a, b


def pearson(x: ArrayLike, y: ArrayLike) -> float:
    a, b = _vectors(x, y, "Pearson")
    da, db = a - a.mean(), b - b.mean()
    denominator = math.sqrt(float(da @ da)) * math.sqrt(float(db @ db))
    if denominator == 0:
        raise MetricError("Pearson correlation is undefined for a constant vector", term="Pearson")
    return float(np.clip((da @ db) / denominator, -1.0, 1.0))


def spearman(x: ArrayLike, y: ArrayLike) -> float:
    """Rank correlation; the d^2 formula without ties, Pearson on average ranks with ties."""
    a, b = _vectors(x, y, "Spearman")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise MetricError("Spearman correlation is undefined for a constant vector", term="Spearman")
    ra, rb = rankdata(a), rankdata(b)
    n = a.size
    if np.unique(a).size == n and np.unique(b).size == n:
        d = ra - rb
        return float(1.0 - 6.0 * float(d @ d) / (n * (n * n - 1)))
    return pearson(ra, rb)


# Reports


def _defined(fn: Callable[[], float]) -> float | None:
    try:
        return fn()
    except MetricError:
        return None


def _affinity_pairs(data: LabeledRanking) -> tuple[Array, Array]:
    if data.affinities is None:
        return np.zeros(0), np.zeros(0)
    keep = np.isfinite(data.affinities)
    return data.scores[keep], data.affinities[keep]


def evaluation_row(data: LabeledRanking) -> dict[str, float | None]:
    """Every screening metric for one query; undefined metrics are None."""
    scores, affinities = _affinity_pairs(data)
    values: list[float | None] = [
        _defined(lambda: auroc(data)),
        _defined(lambda: bedroc(data)),
        *(_defined(lambda p=p: enrichment_factor(data, p)) for p in EF_PERCENTS),
        *(_defined(lambda p=p: roc_enrichment(data, p)) for p in RE_PERCENTS),
        _defined(lambda: pearson(scores, affinities)),
        _defined(lambda: spearman(scores, affinities)),
    ]
    return dict(zip(EVALUATION_COLUMNS, values))


def mean_row(rows: Sequence[dict[str, float | None]], columns: Sequence[str]) -> dict[str, float | None]:
    """Column means over defined cells."""
    out: dict[str, float | None] = {}
    for column in columns:
        defined = [r[column] for r in rows if r.get(column) is not None]
        out[column] = float(np.mean(defined)) if defined else None
    return out


def format_cell(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.6g}"
