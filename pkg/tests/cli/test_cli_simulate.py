"""Test simulate subcommand."""

import pandas as pd
import pytest

from qpp.cli.cli import app
from tests.conftest import DEPHASING_SCENARIO, strip_ansi

FIDELITY_SCENARIO = """\
channel.kind=dephasing
channel.gamma=1.0
property.kind=fidelity
property.w=0,1,0
initial.bloch=0,0.5,0.6
policy.mode=fixed_p
integrator.t_max=1.0
"""


def read_summary(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines())


def test_simulate_dephasing(runner, write_scenario, tmp_path):
    """Tracked dephasing run breaks down at t_b = 0.25 and writes both outputs."""
    out_dir = tmp_path / "runs"
    result = runner.invoke(app, ["--out-dir", str(out_dir), "simulate", str(write_scenario())])
    assert result.exit_code == 0
    assert "Simulation" in strip_ansi(result.stdout)

    frame = pd.read_csv(out_dir / "trajectory.csv")
    assert list(frame.columns) == ["t", "vx", "vy", "vz", "f", "purity", "hx", "hy", "hz", "hnorm"]
    assert frame.t.is_monotonic_increasing
    assert (frame.f - 0.5).abs().max() < 1e-6

    summary = read_summary(out_dir / "summary.txt")
    assert summary["termination"] == "breakdown"
    assert summary["formula_id"] == "dephasing_coherence"
    assert summary["reachability"] == "finite_breakdown"
    assert float(summary["t_b_simulated"]) == pytest.approx(0.25, rel=1e-5)
    assert float(summary["relative_gap"]) < 1e-4


def test_simulate_fidelity(runner, write_scenario, tmp_path):
    """Fixed-p fidelity run against the p-along-axis breakdown time."""
    result = runner.invoke(
        app, ["--quiet", "--out-dir", str(tmp_path), "simulate", str(write_scenario(FIDELITY_SCENARIO))]
    )
    assert result.exit_code == 0
    assert "Simulation" not in result.stdout
    summary = read_summary(tmp_path / "summary.txt")
    assert summary["formula_id"] == "fidelity_pauli_axis"
    assert float(summary["t_b_analytic"]) == pytest.approx(0.36)
    assert float(summary["t_b_simulated"]) == pytest.approx(0.36, rel=1e-5)


def test_simulate_custom_output_names(runner, write_scenario, tmp_path):
    """output.* keys are resolved relative to --out-dir."""
    text = DEPHASING_SCENARIO + "output.trajectory=traj.csv\noutput.summary=run.txt\n"
    result = runner.invoke(app, ["--quiet", "--out-dir", str(tmp_path), "simulate", str(write_scenario(text))])
    assert result.exit_code == 0
    assert (tmp_path / "traj.csv").exists()
    assert (tmp_path / "run.txt").exists()


def test_simulate_invalid_config(runner, write_scenario, tmp_path):
    """Invalid scenarios exit with code 3."""
    path = write_scenario(DEPHASING_SCENARIO.replace("policy.mode=minimal_alpha3", "policy.mode=greedy"))
    result = runner.invoke(app, ["--out-dir", str(tmp_path), "simulate", str(path)])
    assert result.exit_code == 3
    assert "policy.mode" in strip_ansi(result.stdout)
    assert not (tmp_path / "trajectory.csv").exists()


def test_simulate_initial_breakdown(runner, write_scenario, tmp_path):
    """Starting on the breakdown set is an error."""
    path = write_scenario(DEPHASING_SCENARIO.replace("initial.bloch=0.5,0.5,0.70710678118654752", "initial.bloch=0.5,0,0"))
    result = runner.invoke(app, ["--out-dir", str(tmp_path), "simulate", str(path)])
    assert result.exit_code == 1
    assert "Error:" in strip_ansi(result.stdout)
