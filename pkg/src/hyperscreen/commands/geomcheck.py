"""Geomcheck command: property suites for geometry, gradients and small-angle scaling."""

import sys

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..errors import EXIT_NUMERIC
from ..selfcheck import DEFAULT_THETAS, run_geomcheck
from .common import check_mark, reports_errors

console = Console()


def _parse_thetas(ctx: click.Context, param: click.Parameter, value: str | None) -> tuple[float, ...]:
    if value is None:
        return DEFAULT_THETAS
    try:
        thetas = tuple(float(part) for part in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated numbers, e.g. 1e-2,1e-3") from None
    if not thetas or any(not 0 < t < 1 for t in thetas):
        raise click.BadParameter("every angle must lie in (0, 1)")
    return thetas


@click.command()
@click.option("--theta", "thetas", callback=_parse_thetas, help="Comma-separated angles for the small-angle check")
@click.option("--seed", default=0, type=click.IntRange(min=0), help="Seed of the random samples")
@click.option("--fd-batches", default=20, type=click.IntRange(min=0), help="Batches for the gradient check")
@click.option("--corrupt-gradient", is_flag=True, hidden=True)
@reports_errors
def geomcheck(thetas: tuple[float, ...], seed: int, fd_batches: int, corrupt_gradient: bool) -> None:
    """Run the geometry and gradient property checks."""
    if corrupt_gradient:
        fd_batches = max(fd_batches, 1)
    results = run_geomcheck(seed=seed, thetas=thetas, fd_batches=fd_batches, corrupt_gradient=corrupt_gradient)

    table = Table(title="Property Checks")
    table.add_column("Check", style="cyan")
    table.add_column("Status")
    table.add_column("Measured", justify="right")
    table.add_column("Bound")
    table.add_column("Detail", style="dim")
    for result in results:
        table.add_row(result.name, check_mark(result.passed), f"{result.measured:.3e}", result.threshold, result.detail)
    console.print(table)

    failed = [r for r in results if not r.passed]
    if failed:
        console.print(
            Panel.fit(
                f"[red]{len(failed)} of {len(results)} checks failed[/red]",
                title="Summary",
                border_style="red",
            )
        )
        sys.exit(EXIT_NUMERIC)
    console.print(Panel.fit(f"[green]All {len(results)} checks passed[/green]", title="Summary", border_style="green"))
