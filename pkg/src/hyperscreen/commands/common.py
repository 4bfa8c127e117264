"""Helpers shared by the command modules."""

import functools
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, TypeVar, cast

import click
from pydantic import BaseModel
from rich.console import Console
from rich.markup import escape

from ..config import config_keys, load_config_file, resolve_run_config
from ..data import FeatureStore, load_assays, load_features
from ..errors import HyperscreenError
from ..models import Assay
from ..templates import preset_overrides

err_console = Console(stderr=True)

F = TypeVar("F", bound=Callable[..., Any])


def option_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def _shown_default(info: Any) -> str:
    default = info.get_default(call_default_factory=True)
    if default is None:
        return "unset"
    if isinstance(default, bool):
        return str(default).lower()
    return str(default)


def config_options(fn: F) -> F:
    """Add one ``--key-name`` option per configuration key.

    Values stay strings here; the configuration model converts and validates them.
    """
    for name, info in reversed(list(config_keys().items())):
        help_text = f"{info.description or name} [default: {_shown_default(info)}]"
        fn = click.option(option_name(name), name, default=None, metavar="VALUE", help=help_text)(fn)
    return fn


def split_config_flags(values: dict[str, Any]) -> tuple[dict[str, Any], dict[str, Any]]:
    """Separate configuration keys from the command's own parameters."""
    keys = config_keys()
    flags = {k: v for k, v in values.items() if k in keys}
    rest = {k: v for k, v in values.items() if k not in keys}
    return flags, rest


def load_run_config(
    config_path: Path | None, presets: Sequence[str], flags: dict[str, Any]
) -> BaseModel:
    file_values = load_config_file(config_path) if config_path else None
    return resolve_run_config(file_values, preset_overrides(presets), flags)


def load_inputs(assays_path: Path, features_path: Path) -> tuple[list[Assay], FeatureStore]:
    store = load_features(features_path)
    assays = load_assays(assays_path)
    return assays, store


def fail(error: HyperscreenError) -> None:
    """Print ``error`` on stderr and exit with its code."""
    err_console.print(f"[red]Error:[/red] {escape(str(error))}")
    sys.exit(error.exit_code)


def reports_errors(fn: F) -> F:
    """Turn hyperscreen errors raised by a command into their exit codes."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except HyperscreenError as e:
            fail(e)

    return cast(F, wrapper)


def check_mark(ok: bool) -> str:
    return "[green]OK[/green]" if ok else "[red]FAIL[/red]"
