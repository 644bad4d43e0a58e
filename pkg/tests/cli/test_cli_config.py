"""Test config subcommand and scenario parsing."""

import pytest

from qpp.cli._cli.config import parse_scenario
from qpp.cli.cli import app
from qpp.core.exceptions import ConfigurationError
from tests.conftest import DEPHASING_SCENARIO, strip_ansi


def test_version(runner):
    """--version prints the package version."""
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert "qpp version:" in result.stdout


def test_config_init(runner, tmp_path):
    """config init writes a template that validates."""
    path = tmp_path / "scenario.cfg"
    result = runner.invoke(app, ["config", "init", str(path)])
    assert result.exit_code == 0
    assert "Scenario file created at" in strip_ansi(result.stdout)
    assert "channel.kind=dephasing" in path.read_text()
    assert parse_scenario(path.read_text()).channel.kind == "dephasing"


def test_config_init_existing(runner, write_scenario):
    """config init refuses to overwrite unless --force is given."""
    path = write_scenario()
    result = runner.invoke(app, ["config", "init", str(path)])
    assert result.exit_code == 1
    assert "already exists" in strip_ansi(result.stdout)
    assert path.read_text() == DEPHASING_SCENARIO

    result = runner.invoke(app, ["config", "init", str(path), "--force"])
    assert result.exit_code == 0
    assert "# QPP scenario configuration" in path.read_text()


def test_config_show(runner, write_scenario):
    """config show prints resolved values including defaults."""
    result = runner.invoke(app, ["config", "show", str(write_scenario())])
    assert result.exit_code == 0
    output = strip_ansi(result.stdout)
    assert "channel.kind: dephasing" in output
    assert "property.kind: coherence" in output
    assert "policy.mode: minimal_alpha3" in output
    assert "integrator.t_max: 2.0" in output
    assert "integrator.method: DOP853" in output
    assert "seed: 0" in output


@pytest.mark.parametrize(
    "text, message",
    [
        ("channel.kind=dephasing\nchannel.speed=1\n", "unknown key"),
        ("channel.kind=dephasing\nchannel.kind=bit_flip\n", "duplicate key"),
        ("channel.kind\n", "expected key=value"),
        ("channel.kind=dephasing\nchannel.gamma=1\n", "missing required section"),
    ],
)
def test_config_show_invalid(runner, write_scenario, text, message):
    """Malformed scenarios exit with code 3."""
    result = runner.invoke(app, ["config", "show", str(write_scenario(text))])
    assert result.exit_code == 3
    output = strip_ansi(result.stdout)
    assert "invalid configuration" in output
    assert message in output


def test_config_show_missing_file(runner, tmp_path):
    """An unreadable scenario is a configuration error."""
    result = runner.invoke(app, ["config", "show", str(tmp_path / "missing.cfg")])
    assert result.exit_code == 3
    assert "cannot read" in strip_ansi(result.stdout)


def test_parse_scenario_line_numbers():
    """Validation errors point at the offending line."""
    text = DEPHASING_SCENARIO.replace("channel.gamma=1.0", "channel.gamma=-1.0")
    with pytest.raises(ConfigurationError) as exc:
        parse_scenario(text)
    assert exc.value.line == 2
    assert "channel.gamma" in exc.value.message

    with pytest.raises(ConfigurationError) as exc:
        parse_scenario("# header\n\nchannel.kind=dephasing\nchannel.gamma=1\nchannel.bogus=2\n")
    assert exc.value.line == 5


def test_parse_scenario_cross_checks():
    """Scenario-level consistency checks."""
    with pytest.raises(ConfigurationError, match="fidelity requires property.w"):
        parse_scenario(DEPHASING_SCENARIO.replace("property.kind=coherence", "property.kind=fidelity"))
    with pytest.raises(ConfigurationError):
        parse_scenario(DEPHASING_SCENARIO.replace("initial.bloch=0.5,0.5,0.70710678118654752", "initial.bloch=0.5,0.5"))


def test_parse_scenario_values():
    """Comments, lists and defaults are resolved."""
    scenario = parse_scenario(
        "channel.kind=qudit_decay  # amplitude damping between two levels\n"
        "channel.gamma=0.5\n"
        "channel.dim=3\n"
        "channel.levels=0, 2\n"
        "property.kind=population\n"
        "property.level=1\n"
        "initial.coords=0,0,0,0,0,0,0,0\n"
        "seed=7\n"
    )
    assert scenario.channel.levels == (0, 2)
    assert scenario.seed == 7
    assert scenario.initial_state().dim == 3
    assert scenario.target_property().evaluate(scenario.initial_state()) == pytest.approx(1.0 / 3.0)
    assert scenario.policy.mode == "minimal_alpha3"
