"""Tracked simulation of a scenario."""

from __future__ import annotations

import time
from pathlib import Path
from typing import Optional, Tuple

import typer
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from qpp.cli._cli.config import ScenarioConfig, exit_on_error, load_scenario, run_options
from qpp.common.logging import logger
from qpp.common.utils import atomic_write_text, format_float, write_csv
from qpp.core.breakdown import tb_coherence, tb_fidelity
from qpp.core.dynamics import SimulationResult, simulate_tracked
from qpp.core.exceptions import BreakdownPoint, QPPError, UnsupportedScenario
from qpp.core.types import BreakdownPrediction, RunSummary

console = Console()

SIMULATE_HELP = """Integrate a scenario under its control policy.

\b
Writes the trajectory CSV (t,vx,vy,vz,f,purity,hx,hy,hz,hnorm for qubits) and a
key=value summary. A breakdown is a normal outcome and exits with code 0.

\b
EXAMPLES:
  qpp simulate bitflip.cfg
  qpp --out-dir runs/ simulate bitflip.cfg
"""


def analytic_prediction(scenario: ScenarioConfig) -> Optional[BreakdownPrediction]:
    """Closed-form breakdown prediction for the scenario, if one exists for its policy."""
    spec, v0 = scenario.channel, scenario.initial_state()
    kind, mode = scenario.target.kind, scenario.policy.mode
    try:
        if kind == "coherence" and mode == "minimal_alpha3":
            return tb_coherence(spec, v0)
        if kind == "fidelity" and mode == "fixed_p":
            return tb_fidelity(spec, v0, scenario.target.w)
    except BreakdownPoint:
        return BreakdownPrediction(reachability="finite_breakdown", t_b=0.0, formula_id="initial_breakdown")
    except UnsupportedScenario as e:
        logger.debug(f"No analytic breakdown time [kind={kind}, channel={spec.kind}, reason={e.message}]")
    return None


def run_scenario(scenario: ScenarioConfig) -> Tuple[SimulationResult, RunSummary, Optional[BreakdownPrediction]]:
    """Run the tracked simulation and assemble its summary."""
    f = scenario.target_property()
    started = time.perf_counter()
    result = simulate_tracked(
        f, scenario.dissipator(), scenario.initial_state(), scenario.policy, scenario.integrator
    )
    wall_time = time.perf_counter() - started
    prediction = analytic_prediction(scenario)
    summary = RunSummary(
        termination=result.termination.kind,
        t_end=float(result.times[-1]),
        t_b_simulated=result.t_b,
        t_b_analytic=prediction.t_b if prediction is not None else None,
        formula_id=prediction.formula_id if prediction is not None else None,
        reachability=prediction.reachability if prediction is not None else None,
        max_f_drift=result.max_f_drift(),
        final_state=[float(x) for x in result.final_state.coords],
        samples=len(result.times),
        wall_time=wall_time,
        reason=result.termination.reason,
    )
    return result, summary, prediction


def print_summary(summary: RunSummary, title: str) -> None:
    table = Table(show_header=False, box=box.SIMPLE_HEAVY, padding=(0, 1))
    table.add_column("KEY", style="bold cyan")
    table.add_column("VALUE")
    for key, value in summary.model_dump(exclude_none=True).items():
        if isinstance(value, float):
            value = format_float(value)
        elif isinstance(value, list):
            value = ", ".join(f"{x:.6g}" for x in value)
        table.add_row(key, str(value))
    console.print(Panel(table, title=f"[bold]{title}[/bold]", title_align="left", border_style="blue"))


def simulate(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="Scenario file"),
) -> None:
    """Run a tracked simulation and write its trajectory and summary."""
    options = run_options(ctx)
    try:
        scenario = load_scenario(config)
        result, summary, _ = run_scenario(scenario)
    except QPPError as e:
        exit_on_error(e)

    trajectory_path = write_csv(result.to_frame(), options.resolve(scenario.output.trajectory))
    summary_path = atomic_write_text(options.resolve(scenario.output.summary), summary.to_records())
    if not options.quiet:
        print_summary(summary, "Simulation")
        console.print(f"Trajectory written to {trajectory_path}")
        console.print(f"Summary written to {summary_path}")
    if summary.termination == "failure":
        raise typer.Exit(1)
