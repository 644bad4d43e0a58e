"""Test landscape subcommand."""

import pandas as pd

from qpp.cli.cli import app
from tests.conftest import DEPHASING_SCENARIO, strip_ansi

QUTRIT_SCENARIO = """\
channel.kind=qudit_decay
channel.gamma=1.0
channel.dim=3
channel.levels=0,2
property.kind=population
initial.coords=0,0,0,0,0,0,0,0
"""


def test_landscape_grid(runner, write_scenario, tmp_path):
    """A 5-point grid keeps the 33 points inside the Bloch ball."""
    result = runner.invoke(app, ["--out-dir", str(tmp_path), "landscape", str(write_scenario()), "--grid", "5"])
    assert result.exit_code == 0
    assert "Wrote 33 points" in strip_ansi(result.stdout)

    frame = pd.read_csv(tmp_path / "landscape.csv", keep_default_na=False)
    assert list(frame.columns) == ["vx", "vy", "vz", "stable", "breakdown", "on_level_set", "reachability"]
    assert len(frame) == 33
    assert frame.vx.is_monotonic_increasing
    assert set(frame.reachability) == {"finite_breakdown", "trivially_stable"}
    z_axis = frame[(frame.vx == 0) & (frame.vy == 0)]
    assert (z_axis.reachability == "trivially_stable").all()
    assert (z_axis.stable == 1).all()


def test_landscape_custom_output(runner, write_scenario, tmp_path):
    """--out overrides the default file name."""
    out = tmp_path / "scan.csv"
    result = runner.invoke(app, ["--quiet", "landscape", str(write_scenario()), "--grid", "3", "--out", str(out)])
    assert result.exit_code == 0
    assert result.stdout.strip() == ""
    assert len(pd.read_csv(out)) == 7


def test_landscape_without_predictor(runner, write_scenario, tmp_path):
    """Properties without a breakdown formula leave the reachability column empty."""
    text = DEPHASING_SCENARIO.replace("property.kind=coherence", "property.kind=purity")
    result = runner.invoke(app, ["--out-dir", str(tmp_path), "landscape", str(write_scenario(text)), "--grid", "3"])
    assert result.exit_code == 0
    frame = pd.read_csv(tmp_path / "landscape.csv", keep_default_na=False)
    assert (frame.reachability == "").all()


def test_landscape_invalid_grid(runner, write_scenario):
    """Grid sizes below 2 are configuration errors."""
    result = runner.invoke(app, ["landscape", str(write_scenario()), "--grid", "1"])
    assert result.exit_code == 3
    assert "--grid" in strip_ansi(result.stdout)


def test_landscape_rejects_qudits(runner, write_scenario):
    """Landscapes are only defined for qubits."""
    result = runner.invoke(app, ["landscape", str(write_scenario(QUTRIT_SCENARIO)), "--grid", "3"])
    assert result.exit_code == 3
    assert "Bloch ball" in strip_ansi(result.stdout)
