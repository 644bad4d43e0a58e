"""Test fixtures for qpp tests."""

import re
from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from qpp.core.channels import ChannelSpec, builtin_dissipator

_ANSI_RE = re.compile(r"\x1b\[[0-9;]*m")

DEPHASING_SCENARIO = """\
channel.kind=dephasing
channel.gamma=1.0
property.kind=coherence
initial.bloch=0.5,0.5,0.70710678118654752
policy.mode=minimal_alpha3
integrator.t_max=2.0
"""


def strip_ansi(text: str) -> str:
    """Remove ANSI escape codes from text."""
    return _ANSI_RE.sub("", text)


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def dephasing():
    """Dephasing dissipator with gamma = 1 (bloch convention)."""
    return builtin_dissipator(ChannelSpec(kind="dephasing", gamma=1.0))


@pytest.fixture
def bit_flip():
    """Bit-flip dissipator with gamma = 1 (bloch convention)."""
    return builtin_dissipator(ChannelSpec(kind="bit_flip", gamma=1.0))


@pytest.fixture
def relaxation():
    """Thermal relaxation dissipator with gamma1 = 1 and beta_delta = 2."""
    return builtin_dissipator(ChannelSpec(kind="relaxation", gamma=1.0, beta_delta=2.0))


@pytest.fixture
def write_scenario(tmp_path):
    """Write scenario text to a file under tmp_path and return its path."""

    def _write(text: str = DEPHASING_SCENARIO, name: str = "scenario.cfg") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
