"""Realizability check of a prescribed trajectory."""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import typer
from rich.console import Console

from qpp.cli._cli.config import exit_on_error, load_scenario, run_options
from qpp.common.utils import write_csv
from qpp.core.control import trajectory_control
from qpp.core.dynamics import ControlSchedule, simulate_scheduled
from qpp.core.exceptions import ConfigurationError, InvalidTrajectory, QPPError
from qpp.core.landscape import ParamTrajectory, check_realizability, reparameterize
from qpp.core.types import IntegratorConfig

console = Console()

CHECK_TRAJECTORY_HELP = """Check whether a parametrized trajectory can be realized under the scenario's channel.

\b
The CSV header must be u,vx,vy,vz (Bloch coordinates) for qubits or
u,v1,...,vJ (coherence coordinates) for channel.dim > 2, with u in [0, 1].

\b
EXAMPLES:
  qpp check-trajectory arc.csv dephasing.cfg
  qpp check-trajectory steer.csv bitflip.cfg --hamiltonian-out h.csv --verify
"""


def _columns(dim: int) -> List[str]:
    if dim == 2:
        return ["u", "vx", "vy", "vz"]
    return ["u"] + [f"v{j + 1}" for j in range(dim * dim - 1)]


def read_trajectory(path: Path, dim: int) -> ParamTrajectory:
    """Load a trajectory CSV.

    Raises:
        ConfigurationError: If the file is unreadable or its header or values are malformed
    """
    expected = _columns(dim)
    try:
        frame = pd.read_csv(path, dtype=float)
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise ConfigurationError(f"cannot read trajectory {path}: {e}") from e
    if list(frame.columns) != expected:
        raise ConfigurationError(f"trajectory header must be {','.join(expected)}, got {','.join(map(str, frame.columns))}", line=1)
    values = frame.to_numpy()
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])
        raise ConfigurationError("trajectory values must be finite", line=bad + 2)
    try:
        return ParamTrajectory(
            u=values[:, 0],
            coords=values[:, 1:],
            dim=dim,
            convention="bloch" if dim == 2 else "coherence",
        )
    except InvalidTrajectory as e:
        raise ConfigurationError(e.message) from e


def check_trajectory(
    ctx: typer.Context,
    trajectory: Path = typer.Argument(..., help="Trajectory CSV"),
    config: Path = typer.Argument(..., help="Scenario file (channel and property)"),
    tol: float = typer.Option(1e-6, "--tol", help="Realizability tolerance"),
    level_set: bool = typer.Option(False, "--level-set", help="Also require the path to stay on the property's level set"),
    hamiltonian_out: Optional[Path] = typer.Option(
        None, "--hamiltonian-out", help="Write the synthesized control (t,hx,hy,hz,hnorm) to this CSV"
    ),
    verify: bool = typer.Option(False, "--verify", help="Re-integrate under the synthesized control"),
) -> None:
    """Report whether the trajectory is realizable and where it first fails."""
    options = run_options(ctx)
    try:
        scenario = load_scenario(config)
        path = read_trajectory(trajectory, scenario.channel.dim)
        D = scenario.dissipator()
        f = scenario.target_property() if level_set else None
        report = check_realizability(path, D, tol=tol, f=f)

        controls = timed = None
        if report.realizable and (hamiltonian_out is not None or verify):
            timed = reparameterize(path, report)
            controls = trajectory_control(timed, D)
    except QPPError as e:
        exit_on_error(e)

    if report.realizable:
        console.print("[green]realizable[/]")
    else:
        u, reason = report.first_violation
        console.print(f"[red]not realizable[/] first_violation u={u:.9g} reason={reason}")

    if controls is not None and hamiltonian_out is not None:
        norms = np.array([c.norm for c in controls])
        if path.dim == 2:
            h = np.stack([c.h for c in controls])
            frame = pd.DataFrame({"t": timed.times, "hx": h[:, 0], "hy": h[:, 1], "hz": h[:, 2], "hnorm": norms})
        else:
            frame = pd.DataFrame({"t": timed.times, "hnorm": norms})
        written = write_csv(frame, hamiltonian_out)
        if not options.quiet:
            console.print(f"Hamiltonian written to {written}")

    if controls is not None and verify:
        schedule = ControlSchedule.from_controls(timed.times, controls)
        cfg = IntegratorConfig(t_max=timed.final_time, rtol=1e-10, atol=1e-12)
        try:
            result = simulate_scheduled(D, timed.states()[0], schedule, cfg)
        except QPPError as e:
            exit_on_error(e)
        target = timed.coords[-1]
        deviation = float(np.linalg.norm(result.final_state.to_convention(timed.convention).coords - target))
        console.print(f"endpoint deviation={deviation:.3e} at t={result.times[-1]:.9g}")
