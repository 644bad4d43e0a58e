"""Landscape grid scan: stable, breakdown and level-set membership over the Bloch ball."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional

import typer
from rich.console import Console

from qpp.cli._cli.config import ScenarioConfig, exit_on_error, load_scenario, run_options
from qpp.common.utils import write_csv
from qpp.constants import MAX_GRID_POINTS
from qpp.core.breakdown import tb_coherence, tb_fidelity
from qpp.core.exceptions import BreakdownPoint, ConfigurationError, QPPError
from qpp.core.landscape import scan_grid
from qpp.core.operator_space import StateVector

console = Console()

LANDSCAPE_HELP = """Scan an N x N x N grid over the Bloch ball.

\b
Writes vx,vy,vz,stable,breakdown,on_level_set,reachability rows in row-major
order (vx slowest). The level set is the one through the scenario's initial state.

\b
EXAMPLES:
  qpp landscape relaxation.cfg --grid 41
"""


def _reachability(scenario: ScenarioConfig) -> Optional[Callable[[StateVector], str]]:
    spec, kind, mode = scenario.channel, scenario.target.kind, scenario.policy.mode
    if kind == "coherence" and mode == "minimal_alpha3":
        predict = lambda v: tb_coherence(spec, v)  # noqa: E731
    elif kind == "fidelity" and mode == "fixed_p":
        predict = lambda v: tb_fidelity(spec, v, scenario.target.w)  # noqa: E731
    else:
        return None

    def label(v: StateVector) -> str:
        try:
            return predict(v).reachability
        except BreakdownPoint:
            return "finite_breakdown"
        except QPPError:
            return "undefined"

    return label


def landscape(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="Scenario file"),
    grid: int = typer.Option(21, "--grid", "-n", help="Points per axis"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output CSV (default: <out-dir>/landscape.csv)"),
) -> None:
    """Write the landscape grid of a scenario as CSV."""
    options = run_options(ctx)
    try:
        if grid < 2 or grid**3 > MAX_GRID_POINTS:
            raise ConfigurationError(f"--grid must satisfy 2 <= N and N^3 <= {MAX_GRID_POINTS}, got N={grid}")
        scenario = load_scenario(config)
        if scenario.channel.dim != 2:
            raise ConfigurationError("landscape scans are defined over the Bloch ball (channel.dim=2)")
        frame = scan_grid(
            scenario.target_property(),
            scenario.dissipator(),
            scenario.initial_state(),
            grid,
            reachability=_reachability(scenario),
        )
    except QPPError as e:
        exit_on_error(e)

    path = write_csv(frame, out if out is not None else options.resolve(Path("landscape.csv")))
    if not options.quiet:
        console.print(
            f"Wrote {len(frame)} points to {path} "
            f"(stable={int(frame['stable'].sum())}, breakdown={int(frame['breakdown'].sum())}, "
            f"on_level_set={int(frame['on_level_set'].sum())})"
        )
