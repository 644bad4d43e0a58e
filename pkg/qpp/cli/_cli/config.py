"""Scenario configuration: flat `key=value` files with dotted section prefixes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import typer
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from rich import print as rprint
from rich.markup import escape
from rich.console import Console
from rich.panel import Panel
from rich.text import Text

from qpp.common.utils import atomic_write_text
from qpp.core.channels import ChannelSpec, Dissipator, builtin_dissipator
from qpp.core.exceptions import ConfigurationError, QPPError
from qpp.core.operator_space import StateVector
from qpp.core.properties import (
    TargetProperty,
    bloch_component_property,
    coherence_property,
    entropy_property,
    fidelity_property,
    population_property,
    purity_property,
)
from qpp.core.types import IntegratorConfig, SynthesisPolicy

PropertyKind = Literal["coherence", "fidelity", "purity", "custom-vz", "population", "entropy"]

# Keys whose values are comma-separated lists
_LIST_KEYS = {"channel.levels", "property.w", "initial.bloch", "initial.coords"}

_DEFAULT_SCENARIO_TEMPLATE = """\
# QPP scenario configuration
# Format: key=value, one per line; '#' starts a comment.

# Noise channel: dephasing, bit_flip, bit_phase_flip, depolarizing, relaxation,
# relaxation_dephasing, qudit_dephasing, qudit_decay
channel.kind=dephasing
channel.gamma=1.0
# channel.gamma1=1.0           # relaxation_dephasing only
# channel.gamma_d=0.25         # relaxation_dephasing only
# channel.beta_delta=2.0       # relaxation kinds
# channel.dim=2
# channel.levels=0,1           # qudit kinds

# Target property: coherence, fidelity, purity, custom-vz, population, entropy
property.kind=coherence
# property.w=0,1,0             # fidelity reference (Bloch vector)

# Initial state, Bloch coordinates (qubits) or coherence coordinates (initial.coords)
initial.bloch=0.5,0.5,0.70710678118654752

# Control policy: minimal_alpha3, fixed_p, alpha2_steering
policy.mode=minimal_alpha3
# policy.h_max=1e6

# Integrator
integrator.t_max=5.0
# integrator.rtol=1e-10
# integrator.atol=1e-12
# integrator.method=DOP853

# Outputs (relative to --out-dir)
# output.trajectory=trajectory.csv
# output.summary=summary.txt

# seed=0
"""


class PropertyConfig(BaseModel):
    """Which property to preserve."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: PropertyKind = Field(description="Target property")
    w: Optional[Tuple[float, float, float]] = Field(default=None, description="Fidelity reference Bloch vector")
    level: int = Field(default=0, ge=0, description="Population level")
    order: float = Field(default=1.0, gt=0, description="Entropy order (1 = von Neumann)")

    @model_validator(mode="after")
    def _reference(self) -> "PropertyConfig":
        if self.kind == "fidelity" and self.w is None:
            raise ValueError("fidelity requires property.w")
        return self


class InitialConfig(BaseModel):
    """Initial state as Bloch or coherence coordinates."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    bloch: Optional[Tuple[float, float, float]] = Field(default=None, description="Bloch vector (qubits)")
    coords: Optional[List[float]] = Field(default=None, description="Coherence-vector coordinates")

    @model_validator(mode="after")
    def _exactly_one(self) -> "InitialConfig":
        if (self.bloch is None) == (self.coords is None):
            raise ValueError("set exactly one of initial.bloch or initial.coords")
        return self


class OutputConfig(BaseModel):
    """Output file names."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    trajectory: Path = Field(default=Path("trajectory.csv"), description="Trajectory CSV")
    summary: Path = Field(default=Path("summary.txt"), description="Summary records")


class ScenarioConfig(BaseModel):
    """A fully validated scenario."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    channel: ChannelSpec
    target: PropertyConfig = Field(alias="property")
    initial: InitialConfig
    policy: SynthesisPolicy = Field(default_factory=SynthesisPolicy)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: int = Field(default=0, ge=0, description="Sampling seed")

    @model_validator(mode="after")
    def _consistent(self) -> "ScenarioConfig":
        dim = self.channel.dim
        if self.initial.bloch is not None and dim != 2:
            raise ValueError(f"initial.bloch needs a qubit channel, got channel.dim={dim}")
        if self.initial.coords is not None and len(self.initial.coords) != dim * dim - 1:
            raise ValueError(f"initial.coords needs {dim * dim - 1} values for channel.dim={dim}")
        if self.target.kind in ("coherence", "fidelity", "custom-vz", "entropy") and dim != 2:
            raise ValueError(f"property {self.target.kind} is only defined for qubits")
        return self

    def dissipator(self) -> Dissipator:
        return builtin_dissipator(self.channel)

    def initial_state(self) -> StateVector:
        if self.initial.bloch is not None:
            return StateVector.bloch(*self.initial.bloch)
        return StateVector(dim=self.channel.dim, coords=np.asarray(self.initial.coords))

    def target_property(self) -> TargetProperty:
        kind = self.target.kind
        if kind == "coherence":
            return coherence_property()
        if kind == "fidelity":
            return fidelity_property(self.target.w)
        if kind == "purity":
            return purity_property(self.channel.dim)
        if kind == "custom-vz":
            return bloch_component_property(2)
        if kind == "population":
            return population_property(self.channel.dim, self.target.level)
        return entropy_property(self.target.order)


_SECTIONS = {
    "channel": ChannelSpec,
    "property": PropertyConfig,
    "initial": InitialConfig,
    "policy": SynthesisPolicy,
    "integrator": IntegratorConfig,
    "output": OutputConfig,
}


def _known_keys() -> Dict[str, None]:
    keys = {f"{section}.{name}": None for section, model in _SECTIONS.items() for name in model.model_fields}
    keys.pop("channel.terms")
    keys["seed"] = None
    return keys


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate scenario text.

    Raises:
        ConfigurationError: On malformed lines, unknown or duplicate keys, or invalid values
    """
    known = _known_keys()
    data: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"unknown key {key!r}", line=lineno)
        if key in lines:
            raise ConfigurationError(f"duplicate key {key!r} (first set on line {lines[key]})", line=lineno)
        if not value:
            raise ConfigurationError(f"empty value for {key!r}", line=lineno)
        lines[key] = lineno
        parsed: Any = [item.strip() for item in value.split(",")] if key in _LIST_KEYS else value
        if "." in key:
            section, name = key.split(".", 1)
            data.setdefault(section, {})[name] = parsed
        else:
            data[key] = parsed

    for section in ("channel", "property", "initial"):
        if section not in data:
            raise ConfigurationError(f"missing required section {section!r}")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        loc = [str(part) for part in error["loc"]]
        key = ".".join(loc[:2]) if loc else ""
        line = lines.get(key)
        if line is None and loc:
            line = min((n for k, n in lines.items() if k.startswith(f"{loc[0]}.")), default=None)
        message = f"{key}: {error['msg']}" if key else error["msg"]
        raise ConfigurationError(message, line=line) from exc


def load_scenario(path: Path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises:
        ConfigurationError: If the file is unreadable or invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    return parse_scenario(text)


def exit_on_error(error: QPPError) -> None:
    """Print an error and exit: 3 for configuration errors, 1 otherwise."""
    if isinstance(error, ConfigurationError):
        rprint(f"[red]Error:[/] invalid configuration: {escape(str(error))}")
        raise typer.Exit(3)
    rprint(f"[red]Error:[/] {escape(str(error))}")
    raise typer.Exit(1)


app = typer.Typer(
    help="Create and inspect scenario configuration files.",
    add_completion=False,
    no_args_is_help=True,
)

console = Console()


@app.command(name="init")
def init_config(
    path: Path = typer.Argument(..., help="Scenario file to create"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file"),
) -> None:
    """Write a commented template scenario."""
    if path.exists() and not force:
        rprint(f"[yellow]Scenario file already exists:[/] {path}")
        rprint("Use [green]--force[/] to overwrite it.")
        raise typer.Exit(1)

    try:
        atomic_write_text(path, _DEFAULT_SCENARIO_TEMPLATE)
    except OSError as e:
        rprint(f"[red]Error writing scenario file:[/] {e}")
        raise typer.Exit(1)

    rprint(f"[green]✓[/] Scenario file created at [bold]{path}[/]\n")
    rprint(
        Panel(
            Text.from_markup(
                "1. Edit the channel, property and initial state.\n\n"
                "2. Validate it:\n"
                f"   [green]qpp config show {path}[/]\n\n"
                "3. Run it:\n"
                f"   [green]qpp simulate {path}[/]"
            ),
            title="Getting Started",
            title_align="left",
            border_style="blue",
        )
    )


@app.command(name="show")
def show_config(
    path: Path = typer.Argument(..., help="Scenario file to validate"),
) -> None:
    """Validate a scenario and print its resolved values."""
    try:
        scenario = load_scenario(path)
    except ConfigurationError as e:
        exit_on_error(e)

    resolved = scenario.model_dump(by_alias=True, exclude_none=True)
    resolved["channel"].pop("terms", None)
    for section, values in resolved.items():
        if isinstance(values, dict):
            for key, value in values.items():
                rprint(f"{section}.{key}: {value}")
        else:
            rprint(f"{section}: {values}")


@dataclass
class RunOptions:
    """Global command options shared through the typer context."""

    out_dir: Path = Path(".")
    quiet: bool = False

    def resolve(self, path: Path) -> Path:
        return self.out_dir / path


def run_options(ctx: typer.Context) -> RunOptions:
    return ctx.obj if isinstance(ctx.obj, RunOptions) else RunOptions()
