"""Geometry of the control problem: purity rates, stable loci, breakdown sets, realizability."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator

from qpp.common.logging import logger
from qpp.common.utils import map_ordered
from qpp.constants import (
    COLLINEARITY_TOL,
    LOCUS_ZERO_TOL,
    MAX_GRID_POINTS,
    REALIZABILITY_SAMPLES,
)
from qpp.core.channels import (
    ChannelSpec,
    Dissipator,
    LindbladTerm,
    builtin_dissipator,
    dissipator_action,
    dissipator_from_lindblad,
)
from qpp.core.control import ControlField, alpha2_steering, solve_commutator_equation
from qpp.core.exceptions import (
    DimensionMismatch,
    GradientUndefined,
    InvalidTrajectory,
    NotAStablePoint,
    NotRealizable,
    NumericalFailure,
)
from qpp.core.operator_space import (
    BLOCH_SCALE,
    Convention,
    DensityMatrix,
    StateVector,
    build_nice_basis,
    eigendecompose_grouped,
    sample_states,
    state_matrix,
    to_state_vector,
)
from qpp.core.properties import TargetProperty, classify_at

LocusKind = Literal[
    "origin",
    "line",
    "plane",
    "ellipsoid",
    "elliptic_cylinder",
    "parallel_planes",
    "everywhere",
]

ViolationReason = Literal[
    "c_nonpositive",
    "c_infinite",
    "off_level_set",
    "breakdown_point",
    "block_condition",
]

StabilitySource = Union[Dissipator, Sequence[LindbladTerm]]


def purity_rate(D: Dissipator, v: StateVector) -> float:
    """Dissipator-induced purity rate dP/dt, independent of the control.

    Equals v . (R v + c) in the bloch convention (2 v . (R v + c) for coherence coordinates).
    """
    if v.dim != D.dim:
        raise DimensionMismatch(message=f"State dim={v.dim} does not match dissipator dim={D.dim}")
    coords = v.to_convention(D.convention).coords
    rate = float(coords @ D.apply(coords))
    return rate if D.convention == "bloch" else 2.0 * rate


def _as_dissipator(source: StabilitySource, convention: Convention = "bloch") -> Dissipator:
    if isinstance(source, Dissipator):
        return source.to_convention(convention) if source.dim == 2 else source
    D = dissipator_from_lindblad(source)
    return D.to_convention(convention) if D.dim == 2 else D


@dataclass(frozen=True, eq=False)
class StableLocus:
    """Qubit stable set {v : v . (R v + c) = 0}, in principal axes w = O^T v.

    With d_i the eigenvalues of -R (symmetric part) and r_i = c'_i / (2 d_i), the set is
    sum'_i d_i (w_i - r_i)^2 = sum'_i d_i r_i^2, the sums running over nonzero d_i.
    """

    kind: LocusKind
    rotation: np.ndarray
    rates: np.ndarray
    r: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return np.abs(self.rates) > LOCUS_ZERO_TOL * max(float(np.abs(self.rates).max()), np.finfo(float).tiny)

    @property
    def level(self) -> float:
        """Right-hand side sum'_i d_i r_i^2."""
        return float(np.sum(self.rates[self.active] * self.r[self.active] ** 2))

    @property
    def center(self) -> np.ndarray:
        return self.rotation @ self.r

    @property
    def semi_axes(self) -> np.ndarray:
        """sqrt(level / d_i) along active axes, inf along free ones."""
        axes = np.full(3, np.inf)
        axes[self.active] = np.sqrt(self.level / self.rates[self.active])
        return axes

    def residual(self, coords: np.ndarray) -> float:
        """v . (R v + c) rebuilt from the locus data (bloch convention)."""
        w = self.rotation.T @ np.asarray(coords, dtype=float)
        act = self.active
        return float(self.level - np.sum(self.rates[act] * (w[act] - self.r[act]) ** 2))

    def contains(self, v: Union[StateVector, np.ndarray], tol: float = 1e-10) -> bool:
        coords = v.to_convention("bloch").coords if isinstance(v, StateVector) else np.asarray(v, dtype=float)
        return abs(self.residual(coords)) <= tol * float(np.abs(self.rates).max(initial=1.0))

    def _sample_frame(self, n: int, rng: np.random.Generator) -> np.ndarray:
        act = self.active
        free = ~act
        w = np.zeros((n, 3))
        w[:, free] = rng.uniform(-1.0, 1.0, size=(n, int(free.sum())))
        if self.kind == "parallel_planes":
            # w_i = 0 or w_i = 2 r_i along the single active axis
            w[:, act] = np.where(rng.uniform(size=(n, 1)) < 0.5, 0.0, 2.0 * self.r[act])
        elif self.kind in ("ellipsoid", "elliptic_cylinder"):
            direction = rng.normal(size=(n, int(act.sum())))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            w[:, act] = self.r[act] + direction * self.semi_axes[act]
        return w

    def sample(self, n: int, rng: np.random.Generator, max_rounds: int = 100) -> List[StateVector]:
        """Up to n points of the locus inside the Bloch ball."""
        if self.kind == "origin":
            return [StateVector.bloch(0.0, 0.0, 0.0) for _ in range(n)]
        if self.kind == "everywhere":
            return sample_states(2, n, rng, "bloch")

        points: List[np.ndarray] = []
        for _ in range(max_rounds):
            coords = self._sample_frame(n, rng) @ self.rotation.T
            points.extend(c for c in coords if np.linalg.norm(c) <= 1.0)
            if len(points) >= n:
                break
        return [StateVector(dim=2, coords=c, convention="bloch") for c in points[:n]]


def stable_locus(D: Dissipator) -> StableLocus:
    """Classify the qubit stable set of D.

    Raises:
        DimensionMismatch: If D is not a qubit dissipator
        NumericalFailure: If -R is indefinite or c has a component along a zero mode of R
    """
    if D.dim != 2:
        raise DimensionMismatch(message="Stable-locus geometry is only available for qubits")
    D = D.to_convention("bloch")
    symmetric = 0.5 * (D.R + D.R.T)
    eigenvalues, rotation = np.linalg.eigh(-symmetric)
    c_frame = rotation.T @ D.c
    scale = max(float(np.abs(eigenvalues).max()), D.c_norm, np.finfo(float).tiny)

    active = np.abs(eigenvalues) > LOCUS_ZERO_TOL * scale
    if np.any(eigenvalues[active] < 0):
        raise NumericalFailure(message=f"Dissipator has an amplifying direction [eigenvalues={eigenvalues}]")
    if np.any(np.abs(c_frame[~active]) > LOCUS_ZERO_TOL * scale):
        raise NumericalFailure(message="Inhomogeneous term c lies outside the range of R")

    r = np.zeros(3)
    r[active] = c_frame[active] / (2.0 * eigenvalues[active])
    n_active = int(active.sum())
    unital = np.all(np.abs(r) <= LOCUS_ZERO_TOL)

    if n_active == 0:
        kind = "everywhere"
    elif unital:
        kind = {3: "origin", 2: "line", 1: "plane"}[n_active]
    else:
        kind = {3: "ellipsoid", 2: "elliptic_cylinder", 1: "parallel_planes"}[n_active]

    locus = StableLocus(kind=kind, rotation=rotation, rates=eigenvalues, r=r)
    logger.debug(f"Classified stable locus [kind={kind}, center={locus.center}, level={locus.level:.6g}]")
    return locus


def is_stable_point(
    source: StabilitySource,
    state: Union[StateVector, DensityMatrix],
    tol: float = 1e-10,
    method: Literal["auto", "purity", "spectral"] = "auto",
) -> bool:
    """Whether some finite control holds the state fixed.

    The spectral test requires every eigenspace block Pi L_D(rho) Pi to vanish; the qubit
    purity test requires v . (R v + c) = 0 (and c = 0 at the origin).
    """
    v = to_state_vector(state) if isinstance(state, DensityMatrix) else state
    if method == "auto":
        method = "purity" if v.dim == 2 else "spectral"

    if method == "purity":
        if v.dim != 2:
            raise DimensionMismatch(message="The purity stability test is qubit-only")
        D = _as_dissipator(source, "bloch")
        coords = v.to_convention("bloch").coords
        norm = float(np.linalg.norm(coords))
        if norm <= tol:
            return D.c_norm <= tol * max(D.r_norm, np.finfo(float).tiny)
        rate = float(coords @ D.apply(coords))
        return abs(rate) <= tol * (D.r_norm * norm * norm + D.c_norm * norm)

    rho = state_matrix(v)
    L = dissipator_action(source, rho)
    scale = float(np.linalg.norm(L))
    if scale == 0.0:
        return True
    spectrum = eigendecompose_grouped(rho)
    worst = max(float(np.linalg.norm(P @ L @ P)) for P in spectrum.projectors)
    return worst <= tol * scale


def stabilizing_control(source: StabilitySource, state: Union[StateVector, DensityMatrix], tol: float = 1e-10) -> ControlField:
    """Finite control that makes the state stationary.

    Qubits: h = (R v + c) x v / (2 |v|^2). General d: Hermitian H with -i[H, rho] = -L_D(rho).

    Raises:
        NotAStablePoint: If the state is not a stable point
    """
    v = to_state_vector(state) if isinstance(state, DensityMatrix) else state
    if not is_stable_point(source, v, tol):
        raise NotAStablePoint(message=f"{v!r} is not a stable point of the channel")

    if v.dim == 2:
        D = _as_dissipator(source, "bloch")
        coords = v.to_convention("bloch").coords
        norm_sq = float(coords @ coords)
        if norm_sq == 0.0:
            return ControlField.zero(2)
        return ControlField.from_bloch(np.cross(D.apply(coords), coords) / (2.0 * norm_sq))

    rho = state_matrix(v)
    try:
        H = solve_commutator_equation(rho, -dissipator_action(source, rho))
    except NotRealizable as exc:
        raise NotAStablePoint(message=exc.message) from exc
    return ControlField.from_matrix(H)


def breakdown_membership(
    f: TargetProperty, D: Dissipator, v: StateVector, tol: float = COLLINEARITY_TOL
) -> bool:
    """Whether v is a breakdown point of (f, D): grad f nonzero and collinear with v, purity rate nonzero.

    Raises:
        GradientUndefined: If v is outside the property's domain
    """
    cls = classify_at(f, D, v, tol)
    grad_norm = float(np.linalg.norm(f.gradient(v, D.convention)))
    if grad_norm == 0.0 or cls.collinearity > tol * cls.collinearity_scale:
        return False
    coords = v.to_convention(D.convention).coords
    norm = float(np.linalg.norm(coords))
    return abs(purity_rate(D, v)) > tol * (D.r_norm * norm * norm + D.c_norm * norm)


@dataclass(frozen=True, eq=False)
class ParamTrajectory:
    """Parametrized path l(u), u in [0, 1], interpolated piecewise-cubically with a continuous derivative.

    When `derivatives` are supplied the interpolant is Hermite; otherwise a cubic spline.
    """

    u: np.ndarray
    coords: np.ndarray
    dim: int = 2
    convention: Convention = "bloch"
    derivatives: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[0] != u.shape[0]:
            raise InvalidTrajectory(message=f"Need one coordinate row per sample, got {coords.shape} for {u.shape[0]} samples")
        if coords.shape[1] != self.dim * self.dim - 1:
            raise DimensionMismatch(message=f"Trajectory coordinates must have length {self.dim * self.dim - 1}")
        if u.shape[0] < 2:
            raise InvalidTrajectory(message="A trajectory needs at least two samples")
        if np.any(np.diff(u) <= 0):
            raise InvalidTrajectory(message="Parameter samples must be strictly increasing")
        if u[0] < 0.0 or u[-1] > 1.0:
            raise InvalidTrajectory(message=f"Parameter samples must lie in [0, 1], got [{u[0]}, {u[-1]}]")
        if self.derivatives is not None:
            spline = CubicHermiteSpline(u, coords, np.asarray(self.derivatives, dtype=float), axis=0)
        else:
            spline = CubicSpline(u, coords, axis=0)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_velocity", spline.derivative())

    @classmethod
    def from_states(cls, u: Sequence[float], states: Sequence[StateVector]) -> "ParamTrajectory":
        if not states:
            raise InvalidTrajectory(message="A trajectory needs at least two samples")
        convention = states[0].convention
        coords = np.stack([s.to_convention(convention).coords for s in states])
        return cls(u=np.asarray(u), coords=coords, dim=states[0].dim, convention=convention)

    @property
    def bounds(self) -> Tuple[float, float]:
        return float(self.u[0]), float(self.u[-1])

    def __call__(self, u: Union[float, np.ndarray]) -> np.ndarray:
        return self._spline(u)

    def derivative(self, u: Union[float, np.ndarray]) -> np.ndarray:
        return self._velocity(u)

    def state(self, u: float) -> StateVector:
        return StateVector(dim=self.dim, coords=self(u), convention=self.convention)


@dataclass(frozen=True, eq=False)
class TimedTrajectory:
    """Time-parametrized trajectory v(t) with velocities dv/dt, produced by `reparameterize`."""

    times: np.ndarray
    coords: np.ndarray
    velocities: np.ndarray
    dim: int = 2
    convention: Convention = "bloch"

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def coherence_coords(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.convention == "bloch":
            return self.coords / BLOCH_SCALE, self.velocities / BLOCH_SCALE
        return self.coords, self.velocities

    def states(self) -> List[StateVector]:
        return [StateVector(dim=self.dim, coords=c, convention=self.convention) for c in self.coords]


@dataclass(frozen=True, eq=False)
class RealizabilityReport:
    """Outcome of the purity-rate proportionality test along a parametrized path."""

    realizable: bool
    u_grid: np.ndarray
    c_values: np.ndarray
    first_violation: Optional[Tuple[float, ViolationReason]] = None

    @property
    def c_samples(self) -> List[Tuple[float, float]]:
        return [(float(u), float(c)) for u, c in zip(self.u_grid, self.c_values)]


class _PathSampler:
    """Pointwise evaluation of c(u) and the violation reason along a path."""

    def __init__(self, path: ParamTrajectory, D: Dissipator, tol: float, f: Optional[TargetProperty]):
        self.path = path
        self.D = D if path.dim != 2 else D.to_convention(path.convention)
        self.tol = tol
        self.f = f
        self.f0 = f.value_at(path(path.bounds[0]), path.convention) if f is not None else None

    def _purity_terms(self, l: np.ndarray, dl: np.ndarray) -> Tuple[float, float, float, float]:
        weight = 1.0 if self.path.convention == "bloch" else 2.0
        du_p = weight * float(l @ dl)
        rate = weight * float(l @ self.D.apply(l))
        norm = float(np.linalg.norm(l))
        rate_scale = weight * (self.D.r_norm * norm * norm + self.D.c_norm * norm)
        du_scale = weight * norm * float(np.linalg.norm(dl))
        return du_p, rate, du_scale, rate_scale

    def evaluate(self, u: float) -> Tuple[float, Optional[ViolationReason]]:
        """c(u) (nan at stable samples) and the reason it is inadmissible, if any."""
        l, dl = self.path(u), self.path.derivative(u)
        tol = self.tol

        if self.f is not None:
            value = self.f.value_at(l, self.path.convention)
            if not abs(value - self.f0) <= tol * max(1.0, abs(self.f0)):
                return np.nan, "off_level_set"

        du_p, rate, du_scale, rate_scale = self._purity_terms(l, dl)
        stable = abs(rate) <= tol * max(rate_scale, np.finfo(float).tiny)
        if stable:
            if abs(du_p) <= tol * max(du_scale, 1.0):
                c = np.nan
            else:
                return np.inf, "c_infinite"
        else:
            c = du_p / rate if abs(du_p) > tol * du_scale else 0.0
            if c <= 0.0:
                if self.f is not None and self._is_breakdown(l):
                    return c, "breakdown_point"
                return c, "c_nonpositive"

        if self.path.dim > 2 and not self._blocks_vanish(l, dl, c):
            return c, "block_condition"
        return c, None

    def _is_breakdown(self, l: np.ndarray) -> bool:
        state = StateVector(dim=self.path.dim, coords=l, convention=self.path.convention)
        try:
            return breakdown_membership(self.f, self.D, state, max(self.tol, COLLINEARITY_TOL))
        except GradientUndefined:
            return False

    def _blocks_vanish(self, l: np.ndarray, dl: np.ndarray, c: float) -> bool:
        basis = build_nice_basis(self.path.dim)
        rho = np.eye(self.path.dim, dtype=complex) / self.path.dim + basis.expand(l)
        drho = basis.expand(dl)
        drift = self.D.action(rho, basis)
        c = 1.0 if np.isnan(c) else c
        demand = drho - c * drift
        scale = max(float(np.linalg.norm(drho)), c * float(np.linalg.norm(drift)), np.finfo(float).tiny)
        spectrum = eigendecompose_grouped(rho)
        return all(float(np.linalg.norm(P @ demand @ P)) <= self.tol * scale for P in spectrum.projectors)


def check_realizability(
    path: ParamTrajectory,
    D: Dissipator,
    tol: float = 1e-6,
    f: Optional[TargetProperty] = None,
    samples: int = REALIZABILITY_SAMPLES,
) -> RealizabilityReport:
    """Control-independent realizability test.

    A path is realizable iff d_u P = c(u) dP_D/dt with 0 < c(u) < inf along it (plus, for
    d > 2, vanishing eigenspace blocks of d_u rho - c L_D(rho)). When `f` is given the path
    must also stay on the level set of f through its first sample.

    Raises:
        DimensionMismatch: If the path and dissipator dimensions differ
    """
    if path.dim != D.dim:
        raise DimensionMismatch(message=f"Trajectory dim={path.dim} does not match dissipator dim={D.dim}")
    sampler = _PathSampler(path, D, tol, f)
    u0, u1 = path.bounds
    u_grid = np.linspace(u0, u1, samples)

    c_values = np.empty(samples)
    violation: Optional[Tuple[float, ViolationReason]] = None
    for i, u in enumerate(u_grid):
        c, reason = sampler.evaluate(float(u))
        c_values[i] = c
        if reason is not None:
            violation = (_localize(sampler, u_grid[i - 1] if i else u0, float(u), tol), reason)
            break

    if violation is not None:
        logger.debug(f"Trajectory not realizable [u={violation[0]:.6g}, reason={violation[1]}]")
        return RealizabilityReport(False, u_grid, c_values, violation)

    stable = np.isnan(c_values)
    if stable.all():
        c_values[:] = 1.0
    elif stable.any():
        c_values[stable] = np.interp(u_grid[stable], u_grid[~stable], c_values[~stable])
    return RealizabilityReport(True, u_grid, c_values)


def _localize(sampler: _PathSampler, good: float, bad: float, tol: float, iterations: int = 60) -> float:
    if sampler.evaluate(good)[1] is not None:
        return good
    for _ in range(iterations):
        mid = 0.5 * (good + bad)
        if bad - good <= 1e-12:
            break
        if sampler.evaluate(mid)[1] is None:
            good = mid
        else:
            bad = mid
    return bad


def reparameterize(path: ParamTrajectory, report: RealizabilityReport) -> TimedTrajectory:
    """Physical-time trajectory t = phi(u) = integral of c(u) du, with velocities l'(u) / c(u).

    Raises:
        NotRealizable: If the report is not realizable
    """
    if not report.realizable:
        u, reason = report.first_violation or (float("nan"), "c_nonpositive")
        raise NotRealizable(message=f"Trajectory is not realizable [u={u:.6g}, reason={reason}]")
    rate = PchipInterpolator(report.u_grid, report.c_values)
    phi = rate.antiderivative()
    u = report.u_grid
    times = phi(u) - phi(u[0])
    if np.any(np.diff(times) <= 0):
        raise NotRealizable(message="Reparameterized time is not strictly increasing")
    velocities = path.derivative(u) / report.c_values[:, None]
    logger.debug(f"Reparameterized trajectory [samples={len(u)}, final_time={times[-1]:.6g}]")
    return TimedTrajectory(times=times, coords=path(u), velocities=velocities, dim=path.dim, convention=path.convention)


def bitflip_steering_path(v0: StateVector, gamma: float, u_end: float = 0.99, n: int = 2001) -> ParamTrajectory:
    """Designed coherence-preserving bit-flip path onto the x-axis, sampled on [0, u_end].

    The time parametrization c(u) diverges at u = 1, so the path is truncated before it.
    """
    if not 0.0 < u_end < 1.0:
        raise InvalidTrajectory(message=f"u_end must lie in (0, 1), got {u_end}")
    D = builtin_dissipator(ChannelSpec(kind="bit_flip", gamma=gamma))
    law = alpha2_steering(v0, D)
    u = np.linspace(0.0, u_end, n)
    return ParamTrajectory(u=u, coords=law.path(u), dim=2, convention="bloch", derivatives=law.path_derivative(u))


def _grid_flag(value: float, gradient_norm: float, spacing: float) -> bool:
    return abs(value) <= 1e-12 or abs(value) < 0.5 * spacing * gradient_norm


def scan_grid(
    f: TargetProperty,
    D: Dissipator,
    v_ref: StateVector,
    n: int,
    reachability: Optional[Callable[[StateVector], str]] = None,
) -> pd.DataFrame:
    """Evaluate stable / breakdown / level-set membership on an n^3 grid over the Bloch ball.

    Points are ordered row-major (vx slowest, vz fastest) and restricted to |v| <= 1. A set
    {g = 0} is flagged at a grid point when |g| <= 1e-12 or |g| is below half a grid
    spacing times |grad g|.

    Raises:
        ValueError: If n < 2 or the grid exceeds the point cap
    """
    if n < 2 or n**3 > MAX_GRID_POINTS:
        raise ValueError(f"Grid resolution must satisfy 2 <= n and n^3 <= {MAX_GRID_POINTS}, got n={n}")
    D = D.to_convention("bloch")
    axis = np.linspace(-1.0, 1.0, n)
    spacing = float(axis[1] - axis[0])
    mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    points = [p for p in mesh if float(p @ p) <= 1.0 + 1e-12]
    f0 = f.evaluate(v_ref)
    symmetric = D.R + D.R.T

    def evaluate(coords: np.ndarray) -> dict:
        v = StateVector(dim=2, coords=coords, convention="bloch")
        rate = float(coords @ D.apply(coords))
        stable = _grid_flag(rate, float(np.linalg.norm(symmetric @ coords + D.c)), spacing)
        on_level = False
        breakdown = False
        if f.domain_ok(v):
            grad = f.gradient(v, "bloch")
            grad_norm = float(np.linalg.norm(grad))
            on_level = _grid_flag(f.evaluate(v) - f0, grad_norm, spacing)
            if grad_norm > 0 and abs(rate) > 1e-12:
                breakdown = float(np.linalg.norm(np.cross(grad, coords))) <= 0.5 * spacing * grad_norm
        return {
            "vx": coords[0],
            "vy": coords[1],
            "vz": coords[2],
            "stable": int(stable),
            "breakdown": int(breakdown),
            "on_level_set": int(on_level),
            "reachability": reachability(v) if reachability is not None else "",
        }

    rows = map_ordered(evaluate, points)
    logger.debug(f"Scanned landscape grid [n={n}, points={len(rows)}]")
    return pd.DataFrame(rows, columns=["vx", "vy", "vz", "stable", "breakdown", "on_level_set", "reachability"])
