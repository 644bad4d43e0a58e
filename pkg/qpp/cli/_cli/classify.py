"""Controllability classification over a random state sample."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import typer
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from qpp.cli._cli.config import exit_on_error, load_scenario, run_options
from qpp.common.utils import map_ordered, write_csv
from qpp.core.exceptions import GradientUndefined, QPPError
from qpp.core.operator_space import StateVector, sample_states
from qpp.core.properties import classify_at

console = Console()

CLASSIFY_HELP = """Classify the scenario's property at random states.

\b
Each state is trivially_controllable, controllable or uncontrollable; states
outside the property's domain are reported as undefined. Sampling is seeded by
the scenario's seed.

\b
EXAMPLES:
  qpp classify dephasing.cfg --samples 1000
  qpp classify dephasing.cfg --samples 200 --out classes.csv
"""

_CLASSES = ("trivially_controllable", "controllable", "uncontrollable", "undefined")


def classify(
    ctx: typer.Context,
    config: Path = typer.Argument(..., help="Scenario file"),
    samples: int = typer.Option(100, "--samples", "-n", min=1, help="Number of random states"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write per-state diagnostics to this CSV"),
) -> None:
    """Print class counts and optionally write per-state diagnostics."""
    options = run_options(ctx)
    try:
        scenario = load_scenario(config)
        f, D = scenario.target_property(), scenario.dissipator()
        states = sample_states(scenario.channel.dim, samples, np.random.default_rng(scenario.seed))
    except QPPError as e:
        exit_on_error(e)

    def evaluate(v: StateVector) -> dict:
        try:
            cls = classify_at(f, D, v)
        except GradientUndefined:
            return {"class": "undefined", "alignment": np.nan, "collinearity": np.nan}
        return {"class": cls.kind, "alignment": cls.alignment, "collinearity": cls.residual_ratio}

    rows = map_ordered(evaluate, states)
    counts = Counter(row["class"] for row in rows)

    table = Table(show_header=True, box=box.SIMPLE_HEAVY, header_style="bold white", padding=(0, 1))
    table.add_column("CLASS", style="bold cyan")
    table.add_column("COUNT", justify="right")
    table.add_column("FRACTION", justify="right", style="dim")
    for name in _CLASSES:
        table.add_row(name, str(counts.get(name, 0)), f"{counts.get(name, 0) / samples:.1%}")
    if options.quiet:
        for name in _CLASSES:
            typer.echo(f"{name}={counts.get(name, 0)}")
    else:
        console.print(
            Panel(
                table,
                title=f"[bold]{f.name} under {scenario.channel.kind}[/bold]",
                title_align="left",
                subtitle=f"[dim]{samples} state(s)[/dim]",
                subtitle_align="right",
                border_style="blue",
            )
        )

    if out is not None:
        coords = np.stack([v.coords for v in states])
        if scenario.channel.dim == 2:
            data = {"vx": coords[:, 0], "vy": coords[:, 1], "vz": coords[:, 2]}
        else:
            data = {f"v{j + 1}": coords[:, j] for j in range(coords.shape[1])}
        frame = pd.DataFrame(data)
        frame["class"] = [row["class"] for row in rows]
        frame["alignment"] = [row["alignment"] for row in rows]
        frame["collinearity"] = [row["collinearity"] for row in rows]
        path = write_csv(frame, out)
        if not options.quiet:
            console.print(f"Classes written to {path}")
