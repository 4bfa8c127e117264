"""Commands to inspect and create run configuration files."""

from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.table import Table

from ..config import config_keys, render_config_template
from ..errors import ConfigError
from ..storage import atomic_write_text
from .common import config_options, load_run_config, option_name, reports_errors, split_config_flags

console = Console()

DEFAULT_CONFIG_FILENAME = "run.cfg"


@click.group()
def config() -> None:
    """Inspect configuration keys and write config files."""
    pass


@config.command()
def keys() -> None:
    """List every configuration key with its default."""
    table = Table(title="Configuration Keys")
    table.add_column("Key", style="cyan")
    table.add_column("Option", style="dim")
    table.add_column("Default", style="green")
    table.add_column("Description")

    for name, info in config_keys().items():
        default = info.get_default(call_default_factory=True)
        table.add_row(name, option_name(name), "unset" if default is None else str(default), info.description or "")

    console.print(table)


@config.command()
@click.argument("path", required=False, type=click.Path(path_type=Path))
@click.option("--force", is_flag=True, help="Overwrite an existing file")
@reports_errors
def init(path: Path | None, force: bool) -> None:
    """Write a commented config file listing every key."""
    path = path or Path.cwd() / DEFAULT_CONFIG_FILENAME

    if path.exists() and not force:
        raise ConfigError(f"{path} already exists; pass --force to overwrite")

    atomic_write_text(path, render_config_template())
    console.print(f"[green]Created {path} with default settings.[/green]")


@config.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="key = value config file")
@click.option("--preset", "presets", multiple=True, help="Built-in preset; repeat to stack")
@config_options
@reports_errors
def show(config_path: Path | None, presets: tuple[str, ...], **values: Any) -> None:
    """Show the configuration after presets, file and flags are merged."""
    flags, _ = split_config_flags(values)
    run = load_run_config(config_path, presets, flags)

    table = Table(title="Resolved Configuration")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    for key, value in run.model_dump().items():
        table.add_row(key, "unset" if value is None else str(value))

    console.print(table)
