"""Train command."""

from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..config import train_config_from_run
from ..errors import ConfigError
from ..models import LOSS_TERMS
from ..storage import RunDirectory, file_digest
from ..trainer import train as run_training
from .common import config_options, load_inputs, load_run_config, reports_errors, split_config_flags

console = Console()


@click.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="key = value config file")
@click.option("--preset", "presets", multiple=True, help="Built-in preset; repeat to stack")
@click.option("--resume", is_flag=True, help="Continue from the training state in the output directory")
@config_options
@reports_errors
def train(config_path: Path | None, presets: tuple[str, ...], resume: bool, **values: Any) -> None:
    """Train the projection heads and write a checkpoint plus loss log."""
    flags, _ = split_config_flags(values)
    run = load_run_config(config_path, presets, flags)
    settings = run.model_dump()
    if not settings["assays"] or not settings["features"]:
        raise ConfigError("both 'assays' and 'features' must be set")
    config = train_config_from_run(run)
    assays, store = load_inputs(Path(settings["assays"]), Path(settings["features"]))
    run_dir = RunDirectory(Path(settings["output_dir"]))

    result = run_training(assays, store, config, run_dir=run_dir, resume=resume)

    table = Table(title="Final Epoch Losses")
    table.add_column("Term", style="cyan")
    table.add_column("Mean", justify="right", style="green")
    if result.epochs:
        last = result.epochs[-1]
        for term in LOSS_TERMS:
            table.add_row(term, f"{last.breakdown[term]:.6g}")
        table.add_row("[bold]total[/bold]", f"[bold]{last.total:.6g}[/bold]")
    console.print(table)
    console.print(
        Panel.fit(
            f"Epochs: {result.state.epoch}\n"
            f"Checkpoint: {run_dir.checkpoint_path}\n"
            f"Digest: {file_digest(run_dir.checkpoint_path)}\n"
            f"Loss log: {run_dir.loss_log_path}",
            title="Training Complete",
            border_style="green",
        )
    )
