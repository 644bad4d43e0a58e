"""Analytic breakdown time of a scenario, cross-checked against simulation."""

from __future__ import annotations

from pathlib import Path

import typer
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from qpp.cli._cli.config import exit_on_error, load_scenario, run_options
from qpp.cli._cli.simulate import analytic_prediction, run_scenario
from qpp.common.utils import atomic_write_text, format_float
from qpp.core.exceptions import QPPError, UnsupportedScenario

console = Console()

BREAKDOWN_HELP = """Predict the breakdown time of a scenario and compare it with simulation.

\b
Coherence scenarios use the minimal-alpha3 policy, fidelity scenarios the
fixed-p policy. Infinite breakdown times print as INF with a reachability label.

\b
EXAMPLES:
  qpp breakdown dephasing.cfg
  qpp breakdown relaxation.cfg --analytic-only
"""


def _fmt(value) -> str:
    return format_float(value) if value is not None else "-"


def breakdown(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="Scenario file"),
    analytic_only: bool = typer.Option(False, "--analytic-only", help="Skip the simulation cross-check"),
) -> None:
    """Print the analytic and simulated breakdown times and their relative gap."""
    options = run_options(ctx)
    try:
        scenario = load_scenario(config)
        prediction = analytic_prediction(scenario)
        if prediction is None and analytic_only:
            raise UnsupportedScenario(
                message=f"No analytic breakdown time for property={scenario.target.kind}, "
                f"channel={scenario.channel.kind}, policy={scenario.policy.mode}"
            )
        summary = None if analytic_only else run_scenario(scenario)[1]
    except QPPError as e:
        exit_on_error(e)

    if prediction is None:
        analytic = "n/a"
    elif prediction.t_b is None:
        analytic = f"INF ({prediction.reachability}{', ' + prediction.label if prediction.label else ''})"
    else:
        analytic = format_float(prediction.t_b)

    table = Table(show_header=False, box=box.SIMPLE_HEAVY, padding=(0, 1))
    table.add_column("KEY", style="bold cyan")
    table.add_column("VALUE")
    table.add_row("t_b_analytic", analytic)
    if prediction is not None:
        table.add_row("formula_id", prediction.formula_id)
        table.add_row("reachability", prediction.reachability)
    if summary is not None:
        table.add_row("termination", summary.termination)
        table.add_row("t_b_simulated", _fmt(summary.t_b_simulated))
        table.add_row("relative_gap", _fmt(summary.relative_gap))
        atomic_write_text(options.resolve(scenario.output.summary), summary.to_records())

    if options.quiet:
        typer.echo(f"t_b_analytic={analytic}")
        if summary is not None:
            typer.echo(f"t_b_simulated={_fmt(summary.t_b_simulated)}")
            typer.echo(f"relative_gap={_fmt(summary.relative_gap)}")
    else:
        console.print(Panel(table, title="[bold]Breakdown[/bold]", title_align="left", border_style="blue"))
