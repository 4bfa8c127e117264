"""Main CLI entry point."""

from typing import Any

import click
from rich.console import Console

from . import __version__
from .commands.cliffs import cliffs
from .commands.config import config
from .commands.geomcheck import geomcheck
from .commands.preset import preset
from .commands.rank import rank
from .commands.screen import screen
from .commands.synth import synth
from .commands.train import train
from .errors import EXIT_CONFIG
from .log import configure_logging

console = Console()


class HyperscreenGroup(click.Group):
    """Command group whose usage errors exit with the configuration code."""

    def make_context(
        self,
        info_name: str | None,
        args: list[str],
        parent: click.Context | None = None,
        **extra: Any,
    ) -> click.Context:
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_CONFIG
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_CONFIG
            raise


@click.group(cls=HyperscreenGroup)
@click.version_option(version=__version__, prog_name="hyperscreen")
@click.option("-v", "--verbose", is_flag=True, help="Show debug logging")
def main(verbose: bool) -> None:
    """Hyperscreen - hyperbolic metric learning for virtual screening.

    Train pocket and ligand projection heads on the Lorentz model, screen
    ligand libraries, rank by affinity and check the geometry.
    """
    configure_logging(verbose)


# Register commands
main.add_command(train)
main.add_command(screen)
main.add_command(rank)
main.add_command(cliffs)
main.add_command(synth)
main.add_command(geomcheck)
main.add_command(preset)
main.add_command(config)


@main.command()
def info() -> None:
    """Display information about hyperscreen."""
    console.print(f"[bold cyan]hyperscreen[/bold cyan] v{__version__}")
    console.print("\nHyperbolic metric learning for virtual screening.")
    console.print("\n[bold]Commands:[/bold]")
    console.print("  train      - Train the projection heads")
    console.print("  screen     - Rank target libraries and evaluate")
    console.print("  rank       - Per-assay affinity correlations")
    console.print("  cliffs     - Activity-cliff pair separation")
    console.print("  synth      - Generate synthetic fixtures")
    console.print("  geomcheck  - Geometry and gradient property checks")
    console.print("  preset     - List and show run presets")
    console.print("  config     - Configuration keys and files")


if __name__ == "__main__":
    main()
