"""Cliffs command: separation of activity-cliff pairs under a trained model."""

from pathlib import Path

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..analysis import CLIFF_COLUMNS, analyze_cliffs, summarize_cliffs
from ..config import default_output_dir
from ..data import load_cliff_manifest
from ..metrics import format_cell
from ..model import load_checkpoint
from ..storage import RunDirectory
from .common import load_inputs, reports_errors

console = Console()


@click.command()
@click.option("--checkpoint", required=True, type=click.Path(path_type=Path), help="Trained checkpoint")
@click.option("--assays", "assays_path", required=True, type=click.Path(path_type=Path), help="Assay file")
@click.option(
    "--features", "features_path", required=True, type=click.Path(path_type=Path), help="Feature file"
)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(path_type=Path), help="Pair manifest")
@click.option(
    "--output-dir", default=default_output_dir(), type=click.Path(path_type=Path), help="Directory for outputs"
)
@reports_errors
def cliffs(
    checkpoint: Path, assays_path: Path, features_path: Path, pairs_path: Path, output_dir: Path
) -> None:
    """Score both members of every cliff pair and measure their separation."""
    params = load_checkpoint(checkpoint)
    assays, store = load_inputs(assays_path, features_path)
    pairs = load_cliff_manifest(pairs_path)
    results = analyze_cliffs(pairs, assays, store, params)
    summary = summarize_cliffs(results)

    run_dir = RunDirectory(output_dir)
    run_dir.write_report(run_dir.cliff_path, CLIFF_COLUMNS, [r.cells() for r in results])

    table = Table(title="Activity-Cliff Pairs")
    table.add_column("Pair", style="cyan")
    table.add_column("Score gap", justify="right")
    table.add_column("Affinity gap", justify="right")
    table.add_column("Agrees")
    table.add_column("Geodesic", justify="right")
    table.add_column("Tangent", justify="right")
    for r in results:
        table.add_row(
            r.pair_id,
            f"{r.score_gap:.4g}",
            f"{r.affinity_gap:.4g}",
            "[green]yes[/green]" if r.agrees else "[red]no[/red]",
            f"{r.geodesic:.4g}",
            f"{r.tangent:.4g}",
        )
    console.print(table)
    console.print(
        Panel.fit(
            f"Pairs: {summary.pairs}\n"
            f"Directional accuracy: {summary.directional_accuracy:.3f}\n"
            f"Gap correlation: {format_cell(summary.gap_correlation)}\n"
            f"Mean geodesic separation: {summary.mean_geodesic:.4g}\n"
            f"Mean tangent separation: {summary.mean_tangent:.4g}",
            title="Cliff Summary",
            border_style="cyan",
        )
    )
