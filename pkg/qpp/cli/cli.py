"""Main CLI implementation for qpp."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich import print as rprint

from qpp.cli._cli.breakdown import BREAKDOWN_HELP, breakdown
from qpp.cli._cli.classify import CLASSIFY_HELP, classify
from qpp.cli._cli.config import RunOptions, app as config_app
from qpp.cli._cli.landscape import LANDSCAPE_HELP, landscape
from qpp.cli._cli.simulate import SIMULATE_HELP, simulate
from qpp.cli._cli.trajectory import CHECK_TRAJECTORY_HELP, check_trajectory
from qpp.common.logging import set_level

app = typer.Typer(
    name="qpp",
    help="Property-preserving quantum control: simulations, breakdown times and landscapes.",
    add_completion=True,
    no_args_is_help=True,
)


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        from qpp import version

        rprint(f"qpp version: {version.__version__}")
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    out_dir: Path = typer.Option(Path("."), "--out-dir", help="Directory for output files."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress console tables and messages."),
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-v",
        help="Show version and exit.",
        callback=version_callback,
        is_eager=True,
    ),
    debug: bool = typer.Option(
        False,
        "--debug",
        help="Enable debug logging.",
    ),
) -> None:
    """QPP toolkit for tracking control of quantum properties under noise."""
    if debug:
        set_level("DEBUG")
    ctx.obj = RunOptions(out_dir=out_dir, quiet=quiet)


# Add subcommands
app.command("simulate", help=SIMULATE_HELP, no_args_is_help=True, context_settings={"max_content_width": 120})(
    simulate
)
app.command("breakdown", help=BREAKDOWN_HELP, no_args_is_help=True, context_settings={"max_content_width": 120})(
    breakdown
)
app.command("landscape", help=LANDSCAPE_HELP, no_args_is_help=True, context_settings={"max_content_width": 120})(
    landscape
)
app.command(
    "check-trajectory",
    help=CHECK_TRAJECTORY_HELP,
    no_args_is_help=True,
    context_settings={"max_content_width": 120},
)(check_trajectory)
app.command("classify", help=CLASSIFY_HELP, no_args_is_help=True, context_settings={"max_content_width": 120})(
    classify
)
app.add_typer(config_app, name="config")

if __name__ == "__main__":
    app()
