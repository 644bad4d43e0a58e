"""Configuration and result models shared across the toolkit."""

from __future__ import annotations

import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from qpp.constants import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DEFAULT_STABLE_TOL,
    DEFAULT_T_MAX,
)

PolicyMode = Literal["minimal_alpha3", "fixed_p", "alpha2_steering", "trajectory_prescribed"]

Reachability = Literal["finite_breakdown", "stable_reachable", "trivially_stable"]

TerminationKind = Literal["horizon", "breakdown", "stable", "failure"]


class SynthesisPolicy(BaseModel):
    """How the control Hamiltonian is chosen at every state."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: PolicyMode = Field(default="minimal_alpha3", description="Control synthesis policy")
    h_max: Optional[PositiveFloat] = Field(
        default=None,
        description="Control-norm cap used for breakdown detection (1/time)",
    )

    @model_validator(mode="after")
    def _finite_cap(self) -> "SynthesisPolicy":
        if self.h_max is not None and not math.isfinite(self.h_max):
            raise ValueError("h_max must be finite")
        return self


class IntegratorConfig(BaseModel):
    """Adaptive integrator settings for tracked and free simulations."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    rtol: float = Field(default=DEFAULT_RTOL, ge=1e-14, description="Relative tolerance")
    atol: PositiveFloat = Field(default=DEFAULT_ATOL, description="Absolute tolerance")
    max_step: PositiveFloat = Field(default=math.inf, description="Maximum step size (time)")
    t_max: PositiveFloat = Field(default=DEFAULT_T_MAX, description="Integration horizon (time)")
    h_max: Optional[PositiveFloat] = Field(
        default=None, description="Control-norm cap; defaults to 1e6 x the channel rate scale"
    )
    stable_tol: PositiveFloat = Field(
        default=DEFAULT_STABLE_TOL, description="Threshold on |dv/dt| for stable convergence"
    )
    event_tol: Optional[PositiveFloat] = Field(
        default=None, description="Event-time bisection tolerance; defaults to 1e-9 x t_max"
    )
    method: Literal["DOP853", "RK45"] = Field(default="DOP853", description="Embedded RK pair")

    @property
    def resolved_event_tol(self) -> float:
        return self.event_tol if self.event_tol is not None else 1e-9 * self.t_max


class BreakdownPrediction(BaseModel):
    """Analytic (or semi-analytic) breakdown time for a channel/property pair.

    `t_b` is set iff the reachability is `finite_breakdown`; infinite breakdown
    times are never represented by a sentinel float.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    reachability: Reachability
    t_b: Optional[float] = None
    formula_id: str
    label: Optional[str] = None
    inputs: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _finite_iff_breakdown(self) -> "BreakdownPrediction":
        finite = self.t_b is not None
        if finite != (self.reachability == "finite_breakdown"):
            raise ValueError("t_b must be set iff reachability is finite_breakdown")
        if finite and (not math.isfinite(self.t_b) or self.t_b < 0):
            raise ValueError(f"t_b must be finite and >= 0, got {self.t_b}")
        return self

    @property
    def is_finite(self) -> bool:
        return self.t_b is not None


class RunSummary(BaseModel):
    """Summary record of a simulation run, written as `key=value` lines."""

    model_config = ConfigDict(extra="forbid")

    termination: TerminationKind
    t_end: float
    t_b_simulated: Optional[float] = None
    t_b_analytic: Optional[float] = None
    formula_id: Optional[str] = None
    reachability: Optional[Reachability] = None
    relative_gap: Optional[float] = None
    max_f_drift: float
    final_state: List[float]
    samples: int
    wall_time: float
    reason: Optional[str] = None

    @model_validator(mode="after")
    def _gap(self) -> "RunSummary":
        if self.t_b_simulated is not None and self.t_b_analytic is not None:
            denom = abs(self.t_b_analytic) or 1.0
            self.relative_gap = abs(self.t_b_simulated - self.t_b_analytic) / denom
        return self

    def to_records(self) -> str:
        from qpp.common.utils import format_float

        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(format_float(v) for v in value)
            elif isinstance(value, float):
                value = format_float(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"
