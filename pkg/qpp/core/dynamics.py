"""Closed-loop integration of the controlled master equation with breakdown and stable-convergence events."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import DOP853, RK45
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from qpp.common.logging import logger
from qpp.constants import H_MAX_RATE_FACTOR
from qpp.core.channels import Dissipator
from qpp.core.control import (
    ControlField,
    alpha2_steering,
    fixed_p_control,
    synthesize_general,
    synthesize_qubit,
)
from qpp.core.exceptions import (
    BreakdownPoint,
    DimensionMismatch,
    GradientUndefined,
    NumericalFailure,
    UnsupportedScenario,
)
from qpp.core.landscape import is_stable_point
from qpp.core.operator_space import (
    Convention,
    StateVector,
    build_nice_basis,
    commutator,
    purity,
    state_matrix,
)
from qpp.core.properties import TargetProperty, classify_at
from qpp.core.types import IntegratorConfig, SynthesisPolicy, TerminationKind

Controller = Callable[[StateVector], ControlField]

_SOLVERS = {"DOP853": DOP853, "RK45": RK45}


@dataclass(frozen=True)
class Termination:
    """Why a run stopped.

    For breakdowns `t` is the extrapolated breakdown time and `t_event` the time at which
    the control norm reached the cap.
    """

    kind: TerminationKind
    t: float
    reason: Optional[str] = None
    t_event: Optional[float] = None


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Time-stamped samples of a run and its termination verdict."""

    times: np.ndarray
    states: np.ndarray
    controls: List[ControlField]
    f_values: np.ndarray
    purities: np.ndarray
    termination: Termination
    dim: int
    convention: Convention
    h_max: float
    collinearity_residual: Optional[float] = None

    @property
    def control_norms(self) -> np.ndarray:
        return np.array([c.norm for c in self.controls])

    @property
    def t_b(self) -> Optional[float]:
        return self.termination.t if self.termination.kind == "breakdown" else None

    def state(self, index: int) -> StateVector:
        return StateVector(dim=self.dim, coords=self.states[index], convention=self.convention)

    @property
    def final_state(self) -> StateVector:
        return self.state(-1)

    def max_f_drift(self, fraction: float = 0.9) -> float:
        """max |f(t) - f(0)| over samples whose control norm is at most fraction * h_max."""
        mask = self.control_norms <= fraction * self.h_max
        if not mask.any() or np.all(np.isnan(self.f_values)):
            return float("nan")
        return float(np.max(np.abs(self.f_values[mask] - self.f_values[0])))

    def to_frame(self) -> pd.DataFrame:
        """Trajectory table; qubits get Bloch and h columns, larger systems coherence coordinates."""
        if self.dim == 2:
            h = np.stack([c.h for c in self.controls])
            data = {
                "t": self.times,
                "vx": self.states[:, 0],
                "vy": self.states[:, 1],
                "vz": self.states[:, 2],
                "f": self.f_values,
                "purity": self.purities,
                "hx": h[:, 0],
                "hy": h[:, 1],
                "hz": h[:, 2],
                "hnorm": self.control_norms,
            }
        else:
            data = {"t": self.times}
            data.update({f"v{j + 1}": self.states[:, j] for j in range(self.states.shape[1])})
            data.update({"f": self.f_values, "purity": self.purities, "hnorm": self.control_norms})
        return pd.DataFrame(data)


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Prescribed time-dependent control, interpolated by cubic splines of its basis coordinates."""

    times: np.ndarray
    coords: np.ndarray
    dim: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.shape[0] < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("Schedule times must be strictly increasing with at least two samples")
        spline = CubicSpline(times, np.asarray(self.coords, dtype=float), axis=0)
        object.__setattr__(self, "_spline", spline)

    @classmethod
    def from_controls(cls, times: Sequence[float], controls: Sequence[ControlField]) -> "ControlSchedule":
        dim = controls[0].dim
        basis = build_nice_basis(dim)
        coords = np.stack([basis.coordinates(c.H) for c in controls])
        return cls(times=np.asarray(times, dtype=float), coords=coords, dim=dim)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> ControlField:
        basis = build_nice_basis(self.dim)
        t = min(max(t, float(self.times[0])), self.t_end)
        return ControlField.from_matrix(basis.expand(self._spline(t)))


def resolve_h_max(D: Dissipator, policy: Optional[SynthesisPolicy], cfg: IntegratorConfig) -> float:
    """Control-norm cap: integrator setting, else policy setting, else 1e6 x the channel rate scale."""
    if cfg.h_max is not None:
        return float(cfg.h_max)
    if policy is not None and policy.h_max is not None:
        return float(policy.h_max)
    scale = D.rate_scale
    return H_MAX_RATE_FACTOR * (scale if scale > 0 else 1.0)


class _Run:
    """One integration: manual stepping of an embedded RK pair with event handling."""

    def __init__(
        self,
        D: Dissipator,
        v0: StateVector,
        controller: Callable[[float, StateVector], ControlField],
        cfg: IntegratorConfig,
        h_max: float,
        f: Optional[TargetProperty] = None,
        detect_breakdown: bool = True,
        t_bound: Optional[float] = None,
        t_eval: Optional[Sequence[float]] = None,
    ):
        self.dim = v0.dim
        self.convention: Convention = "bloch" if self.dim == 2 else "coherence"
        self.D = D.to_convention(self.convention) if self.dim == 2 else D
        self.v0 = v0.to_convention(self.convention)
        self.basis = build_nice_basis(self.dim)
        self.controller = controller
        self.cfg = cfg
        self.h_max = h_max
        self.f = f
        self.detect_breakdown = detect_breakdown
        self.t_bound = min(cfg.t_max, t_bound) if t_bound is not None else cfg.t_max
        self.t_eval = None if t_eval is None else np.sort(np.asarray(t_eval, dtype=float))
        self.saturation = 10.0 * h_max

        self.times: List[float] = []
        self.states: List[np.ndarray] = []
        self.controls: List[ControlField] = []

    def _state(self, y: np.ndarray) -> StateVector:
        return StateVector(dim=self.dim, coords=y, convention=self.convention)

    def control(self, t: float, y: np.ndarray) -> ControlField:
        try:
            return self.controller(t, self._state(y))
        except BreakdownPoint:
            return ControlField.unbounded(self.dim)

    def velocity(self, y: np.ndarray, control: ControlField, scale: float = 1.0) -> np.ndarray:
        drift = self.D.apply(y)
        if scale == 0.0:
            return drift
        if self.dim == 2:
            return 2.0 * scale * np.cross(control.h, y) + drift
        rho = np.eye(self.dim, dtype=complex) / self.dim + self.basis.expand(y)
        return self.basis.coordinates(-1j * scale * commutator(control.H, rho)) + drift

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        control = self.control(t, y)
        norm = control.norm
        if not math.isfinite(norm):
            scale = 0.0
        elif norm > self.saturation:
            scale = self.saturation / norm
        else:
            scale = 1.0
        return self.velocity(y, control, scale)

    def _norm_at(self, dense, t: float) -> float:
        return self.control(t, dense(t)).norm

    def _crossing(self, dense, t_lo: float, t_hi: float, level: float) -> float:
        def gap(t: float) -> float:
            norm = self._norm_at(dense, t)
            return (norm if math.isfinite(norm) else 2.0 * level) - level

        if gap(t_lo) >= 0:
            return t_lo
        return float(brentq(gap, t_lo, t_hi, xtol=self.cfg.resolved_event_tol))

    def _record(self, t: float, y: np.ndarray, control: ControlField) -> None:
        self.times.append(t)
        self.states.append(np.array(y, dtype=float))
        self.controls.append(control)

    def _emit(self, dense, t_old: float, t_new: float) -> None:
        for t in self.t_eval[(self.t_eval > t_old) & (self.t_eval <= t_new)]:
            y = dense(t)
            self._record(float(t), y, self.control(float(t), y))

    def _stationary(self, y: np.ndarray) -> bool:
        state = self._state(y)
        if self.dim == 2:
            norm = float(np.linalg.norm(y))
            scale = self.D.r_norm * norm + self.D.c_norm
        else:
            scale = float(np.linalg.norm(self.D.action(state_matrix(state), self.basis)))
        tol = max(1e-10, 2.0 * self.cfg.stable_tol / scale) if scale > 0 else 1e-10
        return is_stable_point(self.D, state, tol)

    @staticmethod
    def _extrapolate(t_event: float, t_ref: Optional[float], n_ref: float, h_max: float) -> float:
        # |h| ~ K / sqrt(t_b - t) near a breakdown point
        if t_ref is None or n_ref <= 0 or t_ref >= t_event:
            return t_event
        k = (h_max / n_ref) ** 2
        if k <= 1.0:
            return t_event
        t_b = (k * t_event - t_ref) / (k - 1.0)
        return t_b if t_event <= t_b <= 2.0 * t_event - t_ref else t_event

    def run(self) -> Termination:
        cfg = self.cfg
        y0 = np.array(self.v0.coords, dtype=float)
        control0 = self.controller(0.0, self.v0)
        self._record(0.0, y0, control0)
        if self.detect_breakdown and control0.norm >= self.h_max:
            return Termination("breakdown", 0.0, reason="control cap exceeded at t=0", t_event=0.0)

        solver = _SOLVERS[cfg.method](
            self.rhs, 0.0, y0, self.t_bound, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step
        )
        logger.debug(
            f"Starting integration [method={cfg.method}, t_bound={self.t_bound}, h_max={self.h_max:.3e}, dim={self.dim}]"
        )

        last_norm = control0.norm
        t_half: Optional[float] = None
        prev = (0.0, last_norm)
        quiet = 0
        while True:
            t_old = solver.t
            try:
                message = solver.step()
            except (GradientUndefined, NumericalFailure) as exc:
                logger.warning(f"Control synthesis failed during integration [t={t_old:.6g}, error={exc}]")
                return Termination("failure", float(t_old), reason=str(exc))
            if solver.status == "failed":
                logger.warning(f"Integrator step failed [t={t_old:.6g}, message={message}]")
                return Termination("failure", float(t_old), reason=message or "step failed")

            t_new, y_new = float(solver.t), np.array(solver.y)
            dense = solver.dense_output()
            control = self.control(t_new, y_new)
            norm = control.norm

            if self.detect_breakdown and norm >= self.h_max:
                t_event = self._crossing(dense, t_old, t_new, self.h_max)
                if t_half is None and last_norm < 0.5 * self.h_max:
                    t_half = self._crossing(dense, t_old, t_event, 0.5 * self.h_max)
                y_event = dense(t_event)
                if self.t_eval is not None:
                    self._emit(dense, t_old, t_event)
                if not self.times or self.times[-1] < t_event:
                    self._record(t_event, y_event, self.control(t_event, y_event))
                t_ref, n_ref = (t_half, 0.5 * self.h_max) if t_half is not None else prev
                t_b = self._extrapolate(t_event, t_ref, n_ref, self.h_max)
                logger.debug(f"Breakdown detected [t_event={t_event:.10g}, t_b={t_b:.10g}]")
                return Termination("breakdown", t_b, reason="control norm reached h_max", t_event=t_event)

            if self.detect_breakdown and t_half is None and norm >= 0.5 * self.h_max > last_norm:
                t_half = self._crossing(dense, t_old, t_new, 0.5 * self.h_max)

            if self.t_eval is None:
                self._record(t_new, y_new, control)
            else:
                self._emit(dense, t_old, t_new)

            speed = float(np.linalg.norm(self.velocity(y_new, control))) if math.isfinite(norm) else math.inf
            quiet = quiet + 1 if speed <= cfg.stable_tol else 0
            if quiet >= 2 and self._stationary(y_new):
                if self.t_eval is not None and self.times[-1] < t_new:
                    self._record(t_new, y_new, control)
                return Termination("stable", t_new, reason="|dv/dt| below stable_tol at a stable point")

            if solver.status == "finished":
                if self.t_eval is not None and self.times[-1] < t_new:
                    self._record(t_new, y_new, control)
                return Termination("horizon", t_new)

            if self.detect_breakdown and norm > 0.1 * self.h_max and norm > last_norm > 0:
                growth = (norm / last_norm) ** 2
                remaining = (t_new - prev[0]) / (growth - 1.0)
                solver.max_step = min(cfg.max_step, max(0.5 * remaining, 1e3 * np.finfo(float).eps * max(1.0, t_new)))
            prev = (t_new, norm)
            last_norm = norm

    def result(self, termination: Termination) -> SimulationResult:
        states = np.stack(self.states)
        f_values = np.array(
            [self.f.value_at(s, self.convention) for s in states] if self.f is not None else [np.nan] * len(states)
        )
        purities = np.array([purity(self._state(s)) for s in states])

        residual = None
        if termination.kind == "breakdown" and self.f is not None:
            residual = self._cross_check(states[-1])
        return SimulationResult(
            times=np.asarray(self.times),
            states=states,
            controls=list(self.controls),
            f_values=f_values,
            purities=purities,
            termination=termination,
            dim=self.dim,
            convention=self.convention,
            h_max=self.h_max,
            collinearity_residual=residual,
        )

    def _cross_check(self, y: np.ndarray) -> Optional[float]:
        try:
            cls = classify_at(self.f, self.D, self._state(y))
        except GradientUndefined:
            return None
        threshold = max(1e-6, 10.0 * self.D.rate_scale / self.h_max)
        if cls.residual_ratio > threshold:
            logger.warning(
                f"Breakdown cross-check failed [residual_ratio={cls.residual_ratio:.3e}, threshold={threshold:.3e}]"
            )
        return cls.residual_ratio


def _policy_controller(
    f: TargetProperty, D: Dissipator, v0: StateVector, policy: SynthesisPolicy
) -> Controller:
    if policy.mode == "minimal_alpha3":
        if v0.dim == 2:
            return lambda v: synthesize_qubit(f, D, v)
        return lambda v: synthesize_general(f.gradient_matrix(v), D, state_matrix(v))
    if policy.mode == "fixed_p":
        w = f.reference
        if w is None or abs(float(np.linalg.norm(w)) - 1.0) > 1e-9:
            raise UnsupportedScenario(message="fixed-p control needs a fidelity property with a pure reference")
        return lambda v: fixed_p_control(w, v, D)
    if policy.mode == "alpha2_steering":
        if f.name != "coherence":
            raise UnsupportedScenario(message="alpha_2 steering preserves the coherence property only")
        return alpha2_steering(v0, D).control
    raise UnsupportedScenario(message="trajectory_prescribed runs need a control schedule")


def simulate_tracked(
    f: TargetProperty,
    D: Dissipator,
    v0: StateVector,
    policy: Optional[SynthesisPolicy] = None,
    cfg: Optional[IntegratorConfig] = None,
    schedule: Optional[ControlSchedule] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> SimulationResult:
    """Integrate dv/dt = Q(h(v)) v + R v + c with the control re-synthesized at every stage.

    Breakdown is declared when the control norm reaches h_max (event time refined by
    bisection, breakdown time extrapolated with the square-root singularity model); stable
    convergence when |dv/dt| <= stable_tol on two consecutive steps at a stable point.

    Raises:
        BreakdownPoint: If the property is uncontrollable at v0
        UnsupportedScenario: If the policy does not apply to (f, D)
    """
    policy = policy or SynthesisPolicy()
    cfg = cfg or IntegratorConfig()
    if f.dim != v0.dim or D.dim != v0.dim:
        raise DimensionMismatch(message=f"Property d={f.dim}, dissipator d={D.dim} and state d={v0.dim} differ")
    if policy.mode == "trajectory_prescribed":
        if schedule is None:
            raise UnsupportedScenario(message="trajectory_prescribed runs need a control schedule")
        return simulate_scheduled(D, v0, schedule, cfg, f=f, policy=policy, t_eval=t_eval)

    cls = classify_at(f, D, v0)
    if cls.kind == "uncontrollable" and policy.mode == "minimal_alpha3":
        raise BreakdownPoint(message=f"{f.name} is uncontrollable at the initial state {v0!r}")
    controller = _policy_controller(f, D, v0, policy)
    run = _Run(D, v0, lambda t, v: controller(v), cfg, resolve_h_max(D, policy, cfg), f=f, t_eval=t_eval)
    termination = run.run()
    logger.debug(f"Tracked run finished [kind={termination.kind}, t={termination.t:.10g}, policy={policy.mode}]")
    return run.result(termination)


def simulate_free(
    D: Dissipator,
    v0: StateVector,
    cfg: Optional[IntegratorConfig] = None,
    f: Optional[TargetProperty] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> SimulationResult:
    """Uncontrolled evolution dv/dt = R v + c."""
    cfg = cfg or IntegratorConfig()
    zero = ControlField.zero(v0.dim)
    run = _Run(D, v0, lambda t, v: zero, cfg, resolve_h_max(D, None, cfg), f=f, detect_breakdown=False, t_eval=t_eval)
    return run.result(run.run())


def simulate_scheduled(
    D: Dissipator,
    v0: StateVector,
    schedule: Union[ControlSchedule, Callable[[float], ControlField]],
    cfg: Optional[IntegratorConfig] = None,
    f: Optional[TargetProperty] = None,
    policy: Optional[SynthesisPolicy] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> SimulationResult:
    """Open-loop evolution under a prescribed time-dependent control."""
    cfg = cfg or IntegratorConfig()
    t_bound = schedule.t_end if isinstance(schedule, ControlSchedule) else None
    run = _Run(
        D,
        v0,
        lambda t, v: schedule(t),
        cfg,
        resolve_h_max(D, policy, cfg),
        f=f,
        detect_breakdown=False,
        t_bound=t_bound,
        t_eval=t_eval,
    )
    return run.result(run.run())


def detect_breakdown_time(result: SimulationResult) -> Optional[float]:
    """Breakdown time of a run, or None when the control stayed below h_max.

    Runs without an event (e.g. open-loop) are scanned for the first sample whose control
    norm reaches h_max, interpolating the crossing linearly.
    """
    if result.termination.kind == "breakdown":
        return result.termination.t
    norms = result.control_norms
    above = np.flatnonzero(norms >= result.h_max)
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(result.times[0])
    t0, t1, n0, n1 = result.times[i - 1], result.times[i], norms[i - 1], norms[i]
    if not math.isfinite(n1):
        return float(t1)
    return float(t0 + (result.h_max - n0) * (t1 - t0) / (n1 - n0))
