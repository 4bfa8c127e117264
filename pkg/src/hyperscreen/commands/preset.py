"""Commands to inspect run presets."""

import click
from rich.console import Console
from rich.table import Table

from ..errors import ConfigError
from ..templates import BUILTIN_PRESETS, get_preset
from .common import fail

console = Console()


@click.group()
def preset() -> None:
    """List and inspect built-in run presets."""
    pass


@preset.command("list")
def list_presets() -> None:
    """List available presets."""
    table = Table(title="Available Presets")
    table.add_column("Name", style="cyan")
    table.add_column("Description", style="green")

    for name, p in BUILTIN_PRESETS.items():
        table.add_row(name, p.description)

    console.print(table)


@preset.command()
@click.argument("name")
def show(name: str) -> None:
    """Show the overrides a preset applies."""
    p = get_preset(name)

    if not p:
        fail(ConfigError(f"preset '{name}' does not exist"))
        return

    console.print(f"[bold cyan]{p.name}[/bold cyan]")
    console.print(f"[dim]{p.description}[/dim]\n")

    if not p.overrides:
        console.print("No overrides; every key keeps its default.")
        return

    console.print("[bold]Overrides:[/bold]")
    for key, value in p.overrides.items():
        console.print(f"  {key} = {value}")
