"""Analytic breakdown times and reachability predicates for qubit scenarios.

All inputs are qubit states; coordinates are handled in the bloch convention.
Coherence results assume the minimal-alpha3 policy, fidelity results assume the
fixed-p policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp

from qpp.common.logging import logger
from qpp.core.channels import PAULI_CHANNEL_AXIS, ChannelSpec, builtin_dissipator
from qpp.core.exceptions import (
    BreakdownPoint,
    InvalidReference,
    NumericalFailure,
    OutsideDomain,
    UnsupportedScenario,
)
from qpp.core.operator_space import StateVector
from qpp.core.types import BreakdownPrediction

# Below this, f0 counts as zero (state on the z-axis)
F0_TOL = 1e-15

# Coplanarity / angle tolerance for the fixed-p stable-point conditions
FIXED_P_TOL = 1e-9

# Relative tolerance under which Omega^2 is treated as zero
OMEGA_TOL = 1e-12

_RELAXATION_KINDS = ("relaxation", "relaxation_dephasing")

_Z_AXIS = np.array([0.0, 0.0, 1.0])


def _bloch(v0: StateVector) -> np.ndarray:
    if v0.dim != 2:
        raise UnsupportedScenario(message=f"Analytic breakdown times are only available for qubits, got d={v0.dim}")
    return np.array(v0.to_convention("bloch").coords, dtype=float)


def _channel_inputs(spec: ChannelSpec) -> Dict[str, Any]:
    inputs: Dict[str, Any] = {"kind": spec.kind}
    if spec.kind == "relaxation_dephasing":
        inputs.update(gamma1=spec.gamma1, gamma_d=spec.gamma_d, beta_delta=spec.beta_delta)
    elif spec.kind == "relaxation":
        inputs.update(gamma=spec.gamma, beta_delta=spec.beta_delta)
    else:
        inputs["gamma"] = spec.gamma
    return inputs


def _prediction(
    reachability: str,
    formula_id: str,
    v: np.ndarray,
    spec: ChannelSpec,
    t_b: Optional[float] = None,
    label: Optional[str] = None,
    **extra: Any,
) -> BreakdownPrediction:
    inputs = {"v0": [float(x) for x in v], **_channel_inputs(spec), **extra}
    return BreakdownPrediction(
        reachability=reachability,
        t_b=None if t_b is None else max(float(t_b), 0.0),
        formula_id=formula_id,
        label=label,
        inputs=inputs,
    )


# -- coherence -----------------------------------------------------------------


def _bitflip_tb(vx2: float, vy2: float, vz2: float, gamma: float) -> Optional[float]:
    """(1/4g) ln((1 + xi) e^{vz^2 / (xi f0)} - xi), xi = vy^2 / vx^2; None when xi = 0."""
    f0 = vx2 + vy2
    if vy2 == 0.0:
        return None
    if vx2 == 0.0:
        return math.log1p(vz2 / f0) / (4.0 * gamma)
    xi = vy2 / vx2
    return math.log1p((1.0 + xi) * math.expm1(vz2 / (xi * f0))) / (4.0 * gamma)


def _relaxation_omega2(spec: ChannelSpec, f0: float) -> float:
    a = spec.a
    return spec.gamma2 * f0 / spec.relaxation_rate - a * a


def _relaxation_region(spec: ChannelSpec, v: np.ndarray) -> Tuple[bool, str]:
    f0 = float(v[0] ** 2 + v[1] ** 2)
    vz = float(v[2])
    a = spec.a
    gamma1, gamma2 = spec.relaxation_rate, spec.gamma2
    omega2 = _relaxation_omega2(spec, f0)
    if omega2 > OMEGA_TOL * max(1.0, a * a):
        return False, "outside_threshold"
    if gamma2 * f0 + gamma1 * (vz - a) ** 2 < gamma1 * a * a:
        return True, "inside_ellipsoid"
    if vz >= a - math.sqrt(max(-omega2, 0.0)):
        return True, "above_ellipsoid"
    return False, "below_ellipsoid"


def _relaxation_tb(spec: ChannelSpec, v: np.ndarray) -> Tuple[float, str, float]:
    f0 = float(v[0] ** 2 + v[1] ** 2)
    vz0 = float(v[2])
    a = spec.a
    gamma1 = spec.relaxation_rate
    omega2 = _relaxation_omega2(spec, f0)
    if omega2 > 0:
        omega = math.sqrt(omega2)
        t_b = math.log(((vz0 - a) ** 2 + omega2) / (a * a + omega2)) / (2.0 * gamma1) + (a / (omega * gamma1)) * (
            math.atan((vz0 - a) / omega) + math.atan(a / omega)
        )
        return t_b, "relaxation_above_threshold", omega2
    # below the stability ellipsoid: the arctanh of the closed form continues as arccoth
    k = math.sqrt(-omega2)
    x0 = vz0 - a
    t_b = math.log((x0 * x0 - k * k) / (a * a - k * k)) / (2.0 * gamma1) + (a / (2.0 * k * gamma1)) * (
        math.log(abs((x0 - k) / (x0 + k))) - math.log(abs((a + k) / (a - k)))
    )
    return t_b, "relaxation_below_ellipsoid", omega2


def tb_coherence(spec: ChannelSpec, v0: StateVector) -> BreakdownPrediction:
    """Breakdown time for coherence preservation under the minimal-alpha3 policy.

    Args:
        spec: Built-in qubit channel
        v0: Initial state

    Returns:
        BreakdownPrediction: Finite breakdown time, or the kind of stable outcome

    Raises:
        UnsupportedScenario: For bit-phase-flip, qudit and custom channels
    """
    v = _bloch(v0)
    vx2, vy2, vz2 = (float(x * x) for x in v)
    f0 = vx2 + vy2
    if spec.kind not in ("dephasing", "bit_flip", "depolarizing", *_RELAXATION_KINDS):
        raise UnsupportedScenario(message=f"No closed-form coherence breakdown time for channel kind={spec.kind}")
    if f0 <= F0_TOL:
        return _prediction("trivially_stable", "z_axis", v, spec, label="z_axis", f0=f0)

    if spec.kind == "dephasing":
        t_b = vz2 / (4.0 * spec.gamma * f0)
        return _prediction("finite_breakdown", "dephasing_coherence", v, spec, t_b=t_b, f0=f0)

    if spec.kind == "bit_flip":
        xi = math.inf if vx2 == 0.0 else vy2 / vx2
        t_b = _bitflip_tb(vx2, vy2, vz2, spec.gamma)
        if t_b is None:
            return _prediction("stable_reachable", "bit_flip_coherence", v, spec, label="x_axis_decay", f0=f0, xi=xi)
        formula_id = "bit_flip_coherence_limit" if vx2 == 0.0 else "bit_flip_coherence"
        return _prediction("finite_breakdown", formula_id, v, spec, t_b=t_b, f0=f0, xi=xi)

    if spec.kind == "depolarizing":
        t_b = 3.0 / (8.0 * spec.gamma) * math.log1p(vz2 / f0)
        return _prediction("finite_breakdown", "depolarizing_coherence", v, spec, t_b=t_b, f0=f0)

    reachable, region = _relaxation_region(spec, v)
    omega2 = _relaxation_omega2(spec, f0)
    if reachable:
        return _prediction("stable_reachable", "relaxation_region", v, spec, label=region, f0=f0, omega2=omega2)
    if abs(omega2) <= OMEGA_TOL * max(1.0, spec.a**2):
        logger.debug(f"Degenerate Omega, falling back to quadrature [omega2={omega2:.3e}]")
        return coherence_breakdown_quadrature(spec, v0)
    t_b, formula_id, omega2 = _relaxation_tb(spec, v)
    return _prediction("finite_breakdown", formula_id, v, spec, t_b=t_b, label=region, f0=f0, omega2=omega2)


def coherence_breakdown_quadrature(spec: ChannelSpec, v0: StateVector) -> BreakdownPrediction:
    """Breakdown time from the 1-D quadrature of the tracked v_z equation.

    For channels with R = diag(-r_perp, -r_perp, -r_z) and c = (0, 0, c_z), the tracked
    coherence dynamics keep v_x, v_y fixed and
    v_z' = -(r_perp f0 + r_z v_z^2 - c_z v_z) / v_z.

    Raises:
        UnsupportedScenario: For channels whose (R, c) is not axially symmetric about z
        NumericalFailure: If the quadrature does not converge
    """
    v = _bloch(v0)
    if spec.kind not in ("dephasing", "depolarizing", *_RELAXATION_KINDS):
        raise UnsupportedScenario(message=f"Coherence quadrature is not available for channel kind={spec.kind}")
    D = builtin_dissipator(spec)
    r_perp, r_z, c_z = -float(D.R[0, 0]), -float(D.R[2, 2]), float(D.c[2])
    f0 = float(v[0] ** 2 + v[1] ** 2)
    vz0 = float(v[2])
    if f0 <= F0_TOL:
        return _prediction("trivially_stable", "z_axis", v, spec, label="z_axis", f0=f0)

    def denominator(z: float) -> float:
        return r_perp * f0 + r_z * z * z - c_z * z

    # A root of the denominator between 0 and vz0 is a stable point that stops the descent
    lo, hi = sorted((0.0, vz0))
    roots = np.roots([r_z, -c_z, r_perp * f0]) if r_z != 0.0 else np.array([r_perp * f0 / c_z] if c_z else [])
    real_roots = [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) <= 1e-14 and lo <= r.real <= hi]
    if real_roots:
        return _prediction("stable_reachable", "coherence_quadrature", v, spec, label="stable_root", f0=f0)

    value, abserr = quad(lambda z: z / denominator(z), 0.0, vz0, epsabs=1e-13, epsrel=1e-12, limit=200)
    if not math.isfinite(value):
        raise NumericalFailure(message=f"Coherence quadrature diverged [vz0={vz0:.6g}, f0={f0:.6g}]")
    logger.debug(f"Coherence quadrature [t_b={value:.9g}, abserr={abserr:.2e}]")
    return _prediction("finite_breakdown", "coherence_quadrature", v, spec, t_b=value, f0=f0)


def coherence_closed_form(spec: ChannelSpec, v0: StateVector, t: float) -> StateVector:
    """Tracked state at time t for coherence preservation.

    Supports dephasing and depolarizing (v_x, v_y stay fixed) and bit-flip.

    Raises:
        OutsideDomain: If t < 0 or t >= t_b
        UnsupportedScenario: For other channels
    """
    if spec.kind == "bit_flip":
        return bitflip_closed_form(v0, spec.gamma, t)
    if spec.kind not in ("dephasing", "depolarizing"):
        raise UnsupportedScenario(message=f"No closed-form trajectory for channel kind={spec.kind}")
    v = _bloch(v0)
    prediction = tb_coherence(spec, v0)
    _check_domain(t, prediction.t_b)
    f0 = float(v[0] ** 2 + v[1] ** 2)
    vz2 = float(v[2] ** 2)
    if spec.kind == "dephasing":
        z2 = vz2 - 4.0 * spec.gamma * f0 * t
    else:
        z2 = (vz2 + f0) * math.exp(-8.0 * spec.gamma * t / 3.0) - f0
    vz = math.copysign(math.sqrt(max(z2, 0.0)), v[2])
    return StateVector.bloch(float(v[0]), float(v[1]), vz)


def _check_domain(t: float, t_b: Optional[float]) -> None:
    if t < 0:
        raise OutsideDomain(message=f"Time must be >= 0, got t={t}")
    if t_b is not None and t >= t_b:
        raise OutsideDomain(message=f"t={t:.6g} is at or beyond the breakdown time t_b={t_b:.6g}")


def bitflip_closed_form(v0: StateVector, gamma: float, t: float) -> StateVector:
    """Tracked state at time t for coherence preservation under bit-flip noise.

    Args:
        v0: Initial state
        gamma: Bit-flip rate
        t: Time, 0 <= t < t_b

    Returns:
        StateVector: Bloch-convention state at time t

    Raises:
        OutsideDomain: If t < 0 or t >= t_b
    """
    v = _bloch(v0)
    vx2, vy2, vz2 = (float(x * x) for x in v)
    f0 = vx2 + vy2
    if f0 <= F0_TOL:
        _check_domain(t, None)
        z = math.copysign(math.sqrt(vz2) * math.exp(-2.0 * gamma * t), v[2])
        return StateVector.bloch(float(v[0]), float(v[1]), z)
    _check_domain(t, _bitflip_tb(vx2, vy2, vz2, gamma))

    growth = math.expm1(4.0 * gamma * t)
    y2 = vy2 * f0 / (vx2 * growth + f0)
    # xi f0 ln((vx^2 e^{4gt} + vy^2) / f0), continuous at vx = 0
    if vx2 > 0.0:
        drain = vy2 * f0 / vx2 * math.log1p(vx2 * growth / f0)
    else:
        drain = f0 * growth
    z2 = math.exp(-4.0 * gamma * t) * (vz2 - drain)
    return StateVector.bloch(
        math.copysign(math.sqrt(max(f0 - y2, 0.0)), v[0]),
        math.copysign(math.sqrt(max(y2, 0.0)), v[1]),
        math.copysign(math.sqrt(max(z2, 0.0)), v[2]),
    )


@dataclass(frozen=True)
class CoherenceReachability:
    """Whether a coherence-preserving run can end at a stable point."""

    reachable: bool
    region: str


def coherence_stable_reachability(spec: ChannelSpec, v0: StateVector) -> CoherenceReachability:
    """Region predicate for reaching a stable point while preserving coherence.

    Raises:
        UnsupportedScenario: For qudit and custom channels
    """
    v = _bloch(v0)
    f0 = float(v[0] ** 2 + v[1] ** 2)
    if spec.kind in ("qudit_dephasing", "qudit_decay", "custom"):
        raise UnsupportedScenario(message=f"No reachability predicate for channel kind={spec.kind}")
    if f0 <= F0_TOL:
        return CoherenceReachability(True, "z_axis")
    if spec.kind in ("dephasing", "depolarizing"):
        return CoherenceReachability(False, "breakdown_only")
    if spec.kind in ("bit_flip", "bit_phase_flip"):
        return CoherenceReachability(True, "alpha2_steering")
    reachable, region = _relaxation_region(spec, v)
    return CoherenceReachability(reachable, region)


# -- fidelity ------------------------------------------------------------------


@dataclass(frozen=True)
class FidelityFrame:
    """Decomposition v = alpha_w w + alpha_p p relative to a channel axis d.

    c1 and c2 are nan when p is parallel to d (sin(theta_p) = 0).
    """

    w: np.ndarray
    p: np.ndarray
    axis: np.ndarray
    alpha_w: float
    alpha_p: float
    theta_p: float
    theta_w: float
    c1: float
    c2: float

    @property
    def sin2_p(self) -> float:
        return math.sin(self.theta_p) ** 2

    @property
    def coplanarity(self) -> float:
        """p . (w x d); zero when w, p and d are coplanar."""
        return float(self.p @ np.cross(self.w, self.axis))


def _unit_reference(w: Union[StateVector, np.ndarray]) -> np.ndarray:
    if isinstance(w, StateVector):
        w = w.to_convention("bloch").coords
    w = np.asarray(w, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(w))
    if norm > 1.0 + 1e-12:
        raise InvalidReference(message=f"Reference must lie in the Bloch ball, got |w|={norm:.6g}")
    if abs(norm - 1.0) > 1e-12:
        raise UnsupportedScenario(message=f"Fidelity breakdown times require a pure reference, got |w|={norm:.6g}")
    return w / norm


def fidelity_frame(
    v0: StateVector,
    w: Union[StateVector, np.ndarray],
    axis: Union[int, np.ndarray] = 2,
) -> FidelityFrame:
    """Split v0 into components along the reference w and a unit p orthogonal to it.

    Args:
        v0: Initial state
        w: Pure reference Bloch vector
        axis: Channel axis d, as an index (0, 1, 2) or a 3-vector

    Raises:
        BreakdownPoint: If v0 is collinear with w
        UnsupportedScenario: If |w| != 1
    """
    v = _bloch(v0)
    w = _unit_reference(w)
    if isinstance(axis, (int, np.integer)):
        d = np.zeros(3)
        d[int(axis)] = 1.0
    else:
        d = np.asarray(axis, dtype=float) / float(np.linalg.norm(axis))

    alpha_w = float(v @ w)
    perp = v - alpha_w * w
    alpha_p = float(np.linalg.norm(perp))
    if alpha_p <= 1e-12 * max(1.0, float(np.linalg.norm(v))):
        raise BreakdownPoint(message=f"Initial state is collinear with the reference [alpha_p={alpha_p:.3e}]")
    p = perp / alpha_p

    cos_p = float(np.clip(p @ d, -1.0, 1.0))
    cos_w = float(np.clip(w @ d, -1.0, 1.0))
    sin2_p = 1.0 - cos_p * cos_p
    if sin2_p <= 1e-12:
        c1 = c2 = math.nan
    else:
        c1 = alpha_w * cos_w * cos_p / sin2_p
        c2 = alpha_w**2 * (cos_w**2 + cos_p**2 - 1.0) / sin2_p**2
    return FidelityFrame(
        w=w,
        p=p,
        axis=d,
        alpha_w=alpha_w,
        alpha_p=alpha_p,
        theta_p=math.acos(cos_p),
        theta_w=math.acos(cos_w),
        c1=c1,
        c2=c2,
    )


def fidelity_g(alpha_p: float, c1: float, c2: float) -> float:
    """Antiderivative term c1 * integral of d(alpha) / ((alpha - c1)^2 - c2).

    Each branch is defined up to its own additive constant; only differences
    g(a) - g(b) between points on the same side of any singularity are meaningful.
    """
    x = alpha_p - c1
    if c2 < 0:
        k = math.sqrt(-c2)
        return c1 / k * math.atan(x / k)
    if c2 == 0:
        return -c1 / x
    k = math.sqrt(c2)
    return c1 / (2.0 * k) * math.log(abs((x - k) / (x + k)))


def _pauli_fidelity(spec: ChannelSpec, frame: FidelityFrame, v: np.ndarray) -> BreakdownPrediction:
    gamma = spec.gamma
    alpha_w, alpha0 = frame.alpha_w, frame.alpha_p
    extra = {"alpha_w": alpha_w, "alpha_p": alpha0, "theta_p": frame.theta_p, "theta_w": frame.theta_w}
    if abs(alpha_w) <= 1e-12:
        if frame.sin2_p <= 1e-12:
            return _prediction("trivially_stable", "fidelity_pauli", v, spec, label="on_axis", **extra)
        return _prediction("stable_reachable", "fidelity_pauli", v, spec, label="alpha_w_zero", **extra)
    if frame.sin2_p <= 1e-12:
        # p along the axis: alpha_p^2 decreases linearly
        t_b = alpha0**2 / (4.0 * gamma * alpha_w**2)
        return _prediction("finite_breakdown", "fidelity_pauli_axis", v, spec, t_b=t_b, **extra)

    c1 = frame.c1
    c2 = 0.0 if abs(frame.c2) <= FIXED_P_TOL * alpha_w**2 / frame.sin2_p**2 else frame.c2
    extra.update(c1=c1, c2=frame.c2)

    def q(alpha: float) -> float:
        return (alpha - c1) ** 2 - c2

    # alpha_p' is proportional to -q(alpha_p) / alpha_p; roots of q are fixed points
    if c2 >= 0.0:
        roots = (c1 - math.sqrt(c2), c1 + math.sqrt(c2))
        if any(abs(alpha0 - r) <= FIXED_P_TOL * max(1.0, abs(r)) for r in roots):
            return _prediction("trivially_stable", "fidelity_pauli", v, spec, label="stable_point", **extra)
        if q(alpha0) < 0.0:
            return _prediction("stable_reachable", "fidelity_pauli", v, spec, label="purity_increasing", **extra)
        if any(0.0 < r < alpha0 for r in roots):
            return _prediction("stable_reachable", "fidelity_pauli", v, spec, label="fixed_p_segment", **extra)
    if q(0.0) <= 0.0:
        return _prediction("stable_reachable", "fidelity_pauli", v, spec, label="decays_to_axis", **extra)

    t_b = (0.5 * math.log(q(alpha0) / q(0.0)) + fidelity_g(alpha0, c1, c2) - fidelity_g(0.0, c1, c2)) / (
        2.0 * gamma * frame.sin2_p
    )
    return _prediction("finite_breakdown", "fidelity_pauli", v, spec, t_b=t_b, **extra)


def _purity_rate_poly(spec: ChannelSpec, frame: FidelityFrame) -> np.ndarray:
    """Coefficients of alpha_p alpha_p' = A alpha^2 + B alpha + C along the fixed-p line."""
    D = builtin_dissipator(spec)
    R, c = D.R, D.c
    w, p, aw = frame.w, frame.p, frame.alpha_w
    A = float(p @ R @ p)
    B = float(aw * (w @ R @ p + p @ R @ w) + p @ c)
    C = float(aw * aw * (w @ R @ w) + aw * (w @ c))
    return np.array([A, B, C])


def _relaxation_fidelity(
    spec: ChannelSpec, frame: FidelityFrame, v: np.ndarray, t_max: Optional[float] = None
) -> BreakdownPrediction:
    poly = _purity_rate_poly(spec, frame)
    alpha0 = frame.alpha_p
    extra = {"alpha_w": frame.alpha_w, "alpha_p": alpha0, "theta_p": frame.theta_p, "theta_w": frame.theta_w}
    reachability, label = _fixed_p_outcome(poly, alpha0)
    if reachability != "finite_breakdown":
        return _prediction(reachability, "fidelity_relaxation_ode", v, spec, label=label, **extra)

    # s = alpha_p^2 obeys s' = 2 P(sqrt(s)), which stays regular at s = 0
    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return np.array([2.0 * np.polyval(poly, math.sqrt(max(y[0], 0.0)))])

    def hits_zero(_t: float, y: np.ndarray) -> float:
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    rate = min(-np.polyval(poly, a) for a in np.linspace(0.0, alpha0, 65))
    horizon = t_max if t_max is not None else 2.0 * alpha0**2 / max(2.0 * rate, 1e-300) + 1.0
    sol = solve_ivp(rhs, (0.0, horizon), [alpha0**2], method="DOP853", rtol=1e-12, atol=1e-14, events=hits_zero)
    if not sol.success or sol.t_events[0].size == 0:
        raise NumericalFailure(message=f"alpha_p equation did not reach zero [horizon={horizon:.6g}]")
    t_b = float(sol.t_events[0][0])
    logger.debug(f"Relaxation fidelity breakdown [t_b={t_b:.9g}, nfev={sol.nfev}]")
    return _prediction("finite_breakdown", "fidelity_relaxation_ode", v, spec, t_b=t_b, **extra)


def _fixed_p_outcome(poly: np.ndarray, alpha0: float) -> Tuple[str, Optional[str]]:
    """Fate of alpha_p under alpha alpha' = P(alpha), starting from alpha0 > 0."""
    scale = max(float(np.max(np.abs(poly))), 1e-300)
    p0 = float(np.polyval(poly, alpha0))
    if abs(p0) <= FIXED_P_TOL * scale:
        return "trivially_stable", "stable_point"
    if p0 > 0:
        return "stable_reachable", "purity_increasing"
    if abs(poly[2]) <= FIXED_P_TOL * scale and abs(poly[1]) <= FIXED_P_TOL * scale:
        # P ~ A alpha^2: alpha_p decays exponentially
        return "stable_reachable", "decays_to_axis"
    roots = np.roots(poly) if np.any(poly[:2]) else np.array([])
    for r in np.atleast_1d(roots):
        if abs(r.imag) <= 1e-12 and 0.0 < r.real < alpha0:
            return "stable_reachable", "purity_decreasing"
    return "finite_breakdown", None


def tb_fidelity(
    spec: ChannelSpec,
    v0: StateVector,
    w: Union[StateVector, np.ndarray],
) -> BreakdownPrediction:
    """Breakdown time for fidelity preservation with a pure reference under the fixed-p policy.

    Args:
        spec: Built-in qubit channel
        v0: Initial state
        w: Pure reference Bloch vector, |w| = 1

    Returns:
        BreakdownPrediction: Finite breakdown time, or the kind of stable outcome

    Raises:
        BreakdownPoint: If v0 is collinear with w
        UnsupportedScenario: If |w| != 1, or for qudit and custom channels
    """
    v = _bloch(v0)
    if spec.kind in PAULI_CHANNEL_AXIS:
        frame = fidelity_frame(v0, w, PAULI_CHANNEL_AXIS[spec.kind])
        return _pauli_fidelity(spec, frame, v)
    if spec.kind == "depolarizing":
        frame = fidelity_frame(v0, w, _Z_AXIS)
        extra = {"alpha_w": frame.alpha_w, "alpha_p": frame.alpha_p}
        if abs(frame.alpha_w) <= 1e-12:
            return _prediction("stable_reachable", "fidelity_depolarizing", v, spec, label="alpha_w_zero", **extra)
        t_b = 3.0 / (8.0 * spec.gamma) * math.log1p(frame.alpha_p**2 / frame.alpha_w**2)
        return _prediction("finite_breakdown", "fidelity_depolarizing", v, spec, t_b=t_b, **extra)
    if spec.kind in _RELAXATION_KINDS:
        return _relaxation_fidelity(spec, fidelity_frame(v0, w, _Z_AXIS), v)
    raise UnsupportedScenario(message=f"No fidelity breakdown time for channel kind={spec.kind}")


def fidelity_breakdown_quadrature(
    spec: ChannelSpec,
    v0: StateVector,
    w: Union[StateVector, np.ndarray],
) -> BreakdownPrediction:
    """Fixed-p breakdown time as the quadrature of alpha / -P(alpha) from 0 to alpha_p(0).

    Works for every built-in qubit channel and serves as the oracle for `tb_fidelity`.
    """
    v = _bloch(v0)
    if spec.kind in ("qudit_dephasing", "qudit_decay", "custom"):
        raise UnsupportedScenario(message=f"No fidelity quadrature for channel kind={spec.kind}")
    frame = fidelity_frame(v0, w, _Z_AXIS)
    poly = _purity_rate_poly(spec, frame)
    alpha0 = frame.alpha_p
    extra = {"alpha_w": frame.alpha_w, "alpha_p": alpha0}
    reachability, label = _fixed_p_outcome(poly, alpha0)
    if reachability != "finite_breakdown":
        return _prediction(reachability, "fidelity_quadrature", v, spec, label=label, **extra)
    value, abserr = quad(
        lambda a: -a / float(np.polyval(poly, a)), 0.0, alpha0, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    logger.debug(f"Fidelity quadrature [t_b={value:.9g}, abserr={abserr:.2e}]")
    return _prediction("finite_breakdown", "fidelity_quadrature", v, spec, t_b=value, **extra)


@dataclass(frozen=True)
class FixedPReachability:
    """Outcome of the fixed-p stable-point test, with the value behind each condition."""

    reachable: bool
    coplanar: bool
    between: bool
    above_threshold: bool
    coplanarity: float
    angle_sum: float
    threshold: float
    frame: FidelityFrame


def fixed_p_stable_reachability(
    v0: StateVector,
    w: Union[StateVector, np.ndarray],
    spec: ChannelSpec,
    tol: float = FIXED_P_TOL,
) -> FixedPReachability:
    """Whether the fixed-p policy drives v0 to a stable point under dephasing or bit-flip noise.

    The three conditions are: p, w and the channel axis d are coplanar; d lies between
    p and w (theta_p + theta_w = pi/2 for d or -d); alpha_p > alpha_w tan(theta_w).
    The conditions are evaluated with w oriented so that v0 . w >= 0.

    Raises:
        UnsupportedScenario: For channels other than dephasing, bit-flip and bit-phase-flip
    """
    if spec.kind not in PAULI_CHANNEL_AXIS:
        raise UnsupportedScenario(message=f"Fixed-p stable reachability needs a Pauli channel, got kind={spec.kind}")
    frame = fidelity_frame(v0, w, PAULI_CHANNEL_AXIS[spec.kind])
    coplanarity = frame.coplanarity
    coplanar = abs(coplanarity) <= tol

    alpha_w = abs(frame.alpha_w)
    cos_w = math.copysign(1.0, frame.alpha_w) * float(frame.w @ frame.axis)
    cos_p = float(frame.p @ frame.axis)
    # d and -d describe the same channel; keep the orientation that puts d nearest w
    if cos_w < -tol or (abs(cos_w) <= tol and cos_p < 0):
        cos_w, cos_p = -cos_w, -cos_p
    theta_w = math.acos(min(cos_w, 1.0))
    theta_p = math.acos(max(min(cos_p, 1.0), -1.0))
    angle_sum = theta_p + theta_w
    between = abs(angle_sum - 0.5 * math.pi) <= tol

    threshold = alpha_w * math.tan(theta_w) if theta_w < 0.5 * math.pi - tol else math.inf
    above = frame.alpha_p > threshold
    return FixedPReachability(
        reachable=coplanar and between and above,
        coplanar=coplanar,
        between=between,
        above_threshold=above,
        coplanarity=coplanarity,
        angle_sum=angle_sum,
        threshold=threshold,
        frame=frame,
    )
