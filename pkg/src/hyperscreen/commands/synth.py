"""Synth command: write deterministic synthetic fixtures."""

from pathlib import Path

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..data import (
    CliffPair,
    generate_cliff_pairs,
    generate_synthetic,
    split_assays,
    write_assays,
    write_cliff_manifest,
    write_features,
)
from ..errors import ConfigError
from ..models import CliffPairSpec
from ..storage import file_digest
from .common import reports_errors

console = Console()

ASSAYS_FILENAME = "assays.jsonl"
FEATURES_FILENAME = "features.hypsf"
PAIRS_FILENAME = "pairs.tsv"
SPLIT_NAMES = ("train", "validation", "test")


def _parse_split(ctx: click.Context, param: click.Parameter, value: str | None) -> tuple[float, ...] | None:
    if value is None:
        return None
    try:
        fractions = tuple(float(part) for part in value.split(","))
    except ValueError:
        raise click.BadParameter("expected three comma-separated fractions") from None
    if len(fractions) != 3:
        raise click.BadParameter("expected three comma-separated fractions")
    return fractions


@click.command()
@click.option("--targets", default=20, type=click.IntRange(min=1), help="Number of targets (one assay each)")
@click.option("--ligands", default=50, type=click.IntRange(min=1), help="Ligands per assay")
@click.option("--dim", default=64, type=click.IntRange(min=1), help="Feature dimension")
@click.option("--noise", default=0.05, type=click.FloatRange(min=0), help="Feature noise std")
@click.option("--seed", default=7, type=click.IntRange(min=0), help="Generator seed")
@click.option("--cliffs", default=0, type=click.IntRange(min=0), help="Activity-cliff pairs to embed")
@click.option("--epsilon", default=0.01, type=float, help="Feature distance within a cliff pair")
@click.option("--gap", default=3.0, type=float, help="Affinity gap within a cliff pair")
@click.option("--split", callback=_parse_split, help="Also write target-disjoint splits, e.g. 0.8,0.1,0.1")
@click.option("--output", default="data/synthetic", type=click.Path(path_type=Path), help="Output directory")
@reports_errors
def synth(
    targets: int,
    ligands: int,
    dim: int,
    noise: float,
    seed: int,
    cliffs: int,
    epsilon: float,
    gap: float,
    split: tuple[float, ...] | None,
    output: Path,
) -> None:
    """Generate a synthetic assay set, optionally with activity-cliff pairs."""
    pairs: list[CliffPair] = []
    if cliffs:
        try:
            spec = CliffPairSpec(
                feature_epsilon=epsilon,
                affinity_gap=gap,
                pair_count=cliffs,
                targets=targets,
                ligands_per_assay=ligands,
                dim=dim,
                noise=noise,
            )
        except ValidationError as e:
            raise ConfigError(f"invalid cliff settings: {e.errors()[0]['msg']}") from e
        assays, store, pairs = generate_cliff_pairs(spec, seed)
    else:
        assays, store = generate_synthetic(targets, ligands, dim, noise, seed)

    written = [output / ASSAYS_FILENAME, output / FEATURES_FILENAME]
    write_assays(written[0], assays)
    write_features(written[1], store)
    if cliffs:
        written.append(output / PAIRS_FILENAME)
        write_cliff_manifest(written[-1], pairs)
    if split is not None:
        for name, part in zip(SPLIT_NAMES, split_assays(assays, split, seed)):
            path = output / f"assays_{name}.jsonl"
            write_assays(path, part)
            written.append(path)

    table = Table(title="Synthetic Fixture")
    table.add_column("File", style="cyan")
    table.add_column("SHA-256", style="green")
    for path in written:
        table.add_row(str(path), file_digest(path, length=64))
    console.print(table)
    console.print(f"[dim]{len(assays)} assays, {len(store)} feature rows of dimension {store.dim}[/dim]")
