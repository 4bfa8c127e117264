"""Rank command: per-assay correlation between scores and affinities."""

from collections.abc import Callable
from pathlib import Path
from typing import NamedTuple

import click
from rich.console import Console
from rich.table import Table

from ..config import default_output_dir
from ..data import FeatureStore, validate_references
from ..errors import MetricError
from ..log import get_logger
from ..metrics import RANKING_COLUMNS, format_cell, mean_row, pearson, spearman
from ..model import ModelParams, load_checkpoint
from ..models import Assay
from ..retrieval import build_index, map_ordered, score_all
from ..storage import RunDirectory
from .common import load_inputs, reports_errors

console = Console()
logger = get_logger(__name__)

MIN_LABELED = 2
SKIP_NOTE = "skipped: fewer than 2 ligands with affinity"


class AssayCorrelation(NamedTuple):
    assay_id: str
    n: int
    pearson: float | None
    spearman: float | None
    note: str = ""


def _defined(
    fn: Callable[[list[float], list[float]], float], scores: list[float], affinities: list[float]
) -> float | None:
    try:
        return fn(scores, affinities)
    except MetricError:
        return None


def correlate_assay(assay: Assay, store: FeatureStore, params: ModelParams) -> AssayCorrelation:
    """Score the assay's ligands that carry an affinity and correlate."""
    ligands = [lg for lg in assay.ligands if lg.affinity is not None]
    if len(ligands) < MIN_LABELED:
        return AssayCorrelation(assay.assay_id, len(ligands), None, None, SKIP_NOTE)
    index = build_index(
        [lg.ligand_id for lg in ligands], store, params, [lg.feature_id for lg in ligands]
    )
    ranked = score_all(store.row(assay.pocket_feature_ids[0]), index, params)
    by_id = {lg.ligand_id: float(lg.affinity) for lg in ligands if lg.affinity is not None}
    scores = [e.score for e in ranked.entries]
    affinities = [by_id[e.ligand_id] for e in ranked.entries]
    return AssayCorrelation(
        assay.assay_id,
        len(ligands),
        _defined(pearson, scores, affinities),
        _defined(spearman, scores, affinities),
    )


@click.command()
@click.option("--checkpoint", required=True, type=click.Path(path_type=Path), help="Trained checkpoint")
@click.option("--assays", "assays_path", required=True, type=click.Path(path_type=Path), help="Assay file")
@click.option(
    "--features", "features_path", required=True, type=click.Path(path_type=Path), help="Feature file"
)
@click.option(
    "--output-dir", default=default_output_dir(), type=click.Path(path_type=Path), help="Directory for outputs"
)
@click.option("--threads", default=1, type=click.IntRange(min=1), help="Worker threads across assays")
@reports_errors
def rank(
    checkpoint: Path, assays_path: Path, features_path: Path, output_dir: Path, threads: int
) -> None:
    """Per-assay Pearson and Spearman correlation of scores with affinities."""
    params = load_checkpoint(checkpoint)
    assays, store = load_inputs(assays_path, features_path)
    validate_references(assays, store)

    results = map_ordered(lambda a: correlate_assay(a, store, params), assays, threads)
    for result in results:
        if result.note:
            logger.warning("assay '%s' %s", result.assay_id, result.note)

    rows = [{"Pearson": r.pearson, "Spearman": r.spearman} for r in results if not r.note]
    mean = mean_row(rows, ("Pearson", "Spearman"))
    cells = [
        [r.assay_id, str(r.n), format_cell(r.pearson), format_cell(r.spearman), r.note]
        for r in results
    ]
    cells.append(["mean", str(len(rows)), format_cell(mean["Pearson"]), format_cell(mean["Spearman"]), ""])
    run_dir = RunDirectory(output_dir)
    run_dir.write_report(run_dir.ranking_path, ("assay_id", *RANKING_COLUMNS, "note"), cells)

    table = Table(title="Affinity Ranking")
    table.add_column("Assay", style="cyan")
    for column in RANKING_COLUMNS:
        table.add_column(column, justify="right")
    table.add_column("Note", style="yellow")
    for row in cells:
        table.add_row(*row)
    console.print(table)
