"""Screen command: rank each target's library and evaluate labeled queries."""

from pathlib import Path

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from ..config import default_output_dir
from ..data import FeatureStore, validate_references
from ..log import get_logger
from ..metrics import EVALUATION_COLUMNS, LabeledRanking, evaluation_row, format_cell, mean_row
from ..model import ModelParams, load_checkpoint
from ..retrieval import RankedResult, TargetQuery, build_index, group_by_target, map_ordered, score_all
from ..storage import RunDirectory, file_digest
from .common import load_inputs, reports_errors

console = Console()
logger = get_logger(__name__)

REPORT_PREFIX = ("target_id", "n", "actives")
SHOWN_COLUMNS = ("AUROC", "BEDROC80.5", "EF1", "EF5", "RE1", "Spearman")


def rank_query(query: TargetQuery, store: FeatureStore, params: ModelParams) -> RankedResult:
    index = build_index(query.ligand_ids, store, params, query.feature_ids)
    return score_all(store.row(query.pocket_feature_id), index, params)


def labeled_ranking(query: TargetQuery, ranked: RankedResult) -> LabeledRanking:
    """Labels and affinities aligned with the ranked order of ``query``."""
    position = {lid: i for i, lid in enumerate(query.ligand_ids)}
    rows = [position[lid] for lid in ranked.ids]
    affinities = [query.affinities[i] for i in rows]
    return LabeledRanking.of(
        ranked.scores,
        [query.labels[i] for i in rows],
        [np.nan if a is None else a for a in affinities],
        ranked.ids,
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
@click.option("--threads", default=1, type=click.IntRange(min=1), help="Worker threads across targets")
@reports_errors
def screen(
    checkpoint: Path, assays_path: Path, features_path: Path, output_dir: Path, threads: int
) -> None:
    """Rank every target's ligands by score and write per-target files."""
    params = load_checkpoint(checkpoint)
    digest = file_digest(checkpoint)
    assays, store = load_inputs(assays_path, features_path)
    validate_references(assays, store)

    queries = []
    for query in group_by_target(assays):
        if query.ligand_ids:
            queries.append(query)
        else:
            logger.warning("target '%s' has no ligands; skipped", query.target_id)
    results = map_ordered(lambda q: rank_query(q, store, params), queries, threads)

    run_dir = RunDirectory(output_dir)
    for query, ranked in zip(queries, results):
        run_dir.write_ranked(query.target_id, ranked.pairs(), digest)
    console.print(f"[green]Wrote {len(queries)} ranked file(s) to {run_dir.ranked_dir}[/green]")

    labeled = [(q, r) for q, r in zip(queries, results) if q.is_labeled]
    if not labeled:
        console.print("[dim]No labels in the library; no evaluation report.[/dim]")
        return

    rows = []
    cells = []
    for query, ranked in labeled:
        data = labeled_ranking(query, ranked)
        row = evaluation_row(data)
        rows.append(row)
        cells.append(
            [query.target_id, str(data.size), str(data.positives)]
            + [format_cell(row[c]) for c in EVALUATION_COLUMNS]
        )
    mean = mean_row(rows, EVALUATION_COLUMNS)
    cells.append(["mean", "", ""] + [format_cell(mean[c]) for c in EVALUATION_COLUMNS])
    run_dir.write_report(run_dir.evaluation_path, (*REPORT_PREFIX, *EVALUATION_COLUMNS), cells)

    table = Table(title="Screening Evaluation")
    table.add_column("Target", style="cyan")
    for column in SHOWN_COLUMNS:
        table.add_column(column, justify="right")
    for query_cells in cells:
        values = dict(zip((*REPORT_PREFIX, *EVALUATION_COLUMNS), query_cells))
        table.add_row(query_cells[0], *(values[c] for c in SHOWN_COLUMNS))
    console.print(table)
    console.print(f"[dim]Report: {run_dir.evaluation_path}[/dim]")
