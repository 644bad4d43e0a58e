"""Synthesis of property-preserving control Hamiltonians.

Qubit controls are expressed as H = h . sigma with h in the bloch convention, so that
the unitary part of the Bloch equation is 2 h x v. General-d controls are Hermitian
matrices; `bloch_from_hamiltonian` is the single place where the two are reconciled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np

from qpp.common.logging import logger
from qpp.common.utils import map_ordered
from qpp.constants import BLOCK_TOL, COLLINEARITY_TOL, GROUP_TOL, NEAR_BREAKDOWN_FACTOR
from qpp.core.channels import Dissipator, LindbladTerm, dissipator_action
from qpp.core.exceptions import (
    BreakdownPoint,
    DimensionMismatch,
    InvalidReference,
    NotHermitian,
    NotRealizable,
    UnsupportedScenario,
)
from qpp.core.operator_space import (
    PAULIS,
    DensityMatrix,
    StateVector,
    build_nice_basis,
    commutator,
    eigendecompose_grouped,
    hs_inner,
    is_hermitian,
)
from qpp.core.properties import TargetProperty, classify_at

if TYPE_CHECKING:
    from qpp.core.landscape import TimedTrajectory

Alphas = Tuple[float, float, float]


def hamiltonian_from_bloch(h: np.ndarray) -> np.ndarray:
    """H = h_x sigma_x + h_y sigma_y + h_z sigma_z."""
    return np.tensordot(np.asarray(h, dtype=float), PAULIS, axes=1)


def bloch_from_hamiltonian(H: np.ndarray) -> np.ndarray:
    """Inverse of `hamiltonian_from_bloch`: h_k = Tr(H sigma_k) / 2 (identity part dropped)."""
    H = np.asarray(H, dtype=complex)
    if H.shape != (2, 2):
        raise DimensionMismatch(message=f"Bloch control vectors exist for qubits only, got H {H.shape}")
    return 0.5 * np.einsum("kab,ba->k", PAULIS, H).real


@dataclass(frozen=True, eq=False)
class ControlField:
    """Control Hamiltonian at one state.

    Qubit controls carry the bloch vector `h` alongside the matrix; `alphas` is the
    (alpha_1, alpha_2, alpha_3) decomposition in the basis {v, grad f, grad f x v} when
    known. `h0`, the identity component, never affects the dynamics and is always 0.
    """

    dim: int
    H: np.ndarray
    h: Optional[np.ndarray] = None
    alphas: Optional[Alphas] = None
    near_breakdown: bool = False
    constraint_residual: float = 0.0
    h0: float = field(default=0.0, init=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise DimensionMismatch(message=f"Control for d={self.dim} must be {self.dim}x{self.dim}, got {H.shape}")
        if np.all(np.isfinite(H)) and not is_hermitian(H):
            raise NotHermitian(message="Control Hamiltonian is not Hermitian")
        H = H.copy()
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        if self.h is not None:
            h = np.array(self.h, dtype=float)
            h.setflags(write=False)
            object.__setattr__(self, "h", h)

    @classmethod
    def from_bloch(cls, h: np.ndarray, **kwargs) -> "ControlField":
        h = np.asarray(h, dtype=float)
        H = hamiltonian_from_bloch(h) if np.all(np.isfinite(h)) else np.full((2, 2), np.inf, dtype=complex)
        return cls(dim=2, H=H, h=h, **kwargs)

    @classmethod
    def from_matrix(cls, H: np.ndarray, **kwargs) -> "ControlField":
        H = np.asarray(H, dtype=complex)
        h = bloch_from_hamiltonian(H) if H.shape == (2, 2) else None
        return cls(dim=H.shape[0], H=H, h=h, **kwargs)

    @classmethod
    def unbounded(cls, dim: int) -> "ControlField":
        """Marker for a diverging control (the state is a breakdown point)."""
        if dim == 2:
            return cls.from_bloch(np.full(3, np.inf), near_breakdown=True)
        return cls(dim=dim, H=np.full((dim, dim), np.inf, dtype=complex), near_breakdown=True)

    @classmethod
    def zero(cls, dim: int) -> "ControlField":
        if dim == 2:
            return cls.from_bloch(np.zeros(3), alphas=(0.0, 0.0, 0.0))
        return cls(dim=dim, H=np.zeros((dim, dim), dtype=complex))

    @property
    def norm(self) -> float:
        """Euclidean norm of h for qubits, Frobenius norm of H otherwise."""
        if self.h is not None:
            return float(np.linalg.norm(self.h))
        return float(np.linalg.norm(self.H))


def decompose_control(h: np.ndarray, grad: np.ndarray, v: np.ndarray) -> Alphas:
    """Coefficients (alpha_1, alpha_2, alpha_3) with h = a1 v + a2 grad + a3 grad x v.

    Falls back to least squares when the three directions are degenerate.
    """
    basis = np.column_stack([v, grad, np.cross(grad, v)])
    alphas, *_ = np.linalg.lstsq(basis, np.asarray(h, dtype=float), rcond=None)
    return tuple(float(a) for a in alphas)  # type: ignore[return-value]


def synthesize_qubit(
    f: TargetProperty, D: Dissipator, v: StateVector, tol: float = COLLINEARITY_TOL
) -> ControlField:
    """Minimal f-preserving qubit control h = alpha_3 (grad f x v).

    alpha_3 = grad f . (R v + c) / (2 |grad f x v|^2); alpha_1 = alpha_2 = 0.

    Args:
        f: Target property (d = 2)
        D: Qubit dissipator, any convention
        v: Current state
        tol: Classification tolerance

    Returns:
        ControlField with `h` in the bloch convention

    Raises:
        BreakdownPoint: If f is uncontrollable at v
        GradientUndefined: If v is outside the property's domain
    """
    if D.dim != 2 or v.dim != 2:
        raise DimensionMismatch(message="synthesize_qubit requires a qubit dissipator and state")
    D = D.to_convention("bloch")
    cls = classify_at(f, D, v, tol)
    if cls.kind == "trivially_controllable":
        return ControlField.zero(2)
    if cls.kind == "uncontrollable":
        raise BreakdownPoint(
            message=f"{f.name} is uncontrollable at {v!r} [residual={cls.collinearity:.3e}]"
        )

    coords = v.to_convention("bloch").coords
    grad = f.gradient(v, "bloch")
    normal = np.cross(grad, coords)
    alpha3 = cls.alignment / (2.0 * float(normal @ normal))
    h = alpha3 * normal
    residual = float(grad @ (2.0 * np.cross(h, coords) + D.apply(coords)))
    near = cls.collinearity <= NEAR_BREAKDOWN_FACTOR * tol * cls.collinearity_scale
    if near:
        logger.debug(f"Control near breakdown [residual_ratio={cls.residual_ratio:.3e}, norm={np.linalg.norm(h):.3e}]")
    return ControlField.from_bloch(h, alphas=(0.0, 0.0, alpha3), near_breakdown=near, constraint_residual=residual)


def synthesize_general(
    grad_f: np.ndarray,
    source: Union[Dissipator, Sequence[LindbladTerm]],
    rho: Union[DensityMatrix, np.ndarray],
    tol: float = COLLINEARITY_TOL,
) -> ControlField:
    """Matrix-form f-preserving control H = i <grad f, L_D rho> [rho, grad f] / |[rho, grad f]|^2.

    Raises:
        BreakdownPoint: If [rho, grad f] vanishes while the dissipator drives f
    """
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    grad_f = np.asarray(grad_f, dtype=complex)
    if grad_f.shape != mat.shape:
        raise DimensionMismatch(message=f"Gradient {grad_f.shape} does not match state {mat.shape}")
    d = mat.shape[0]

    L = dissipator_action(source, mat)
    drive = hs_inner(grad_f, L)
    comm = commutator(mat, grad_f)
    comm_sq = float(np.real(np.vdot(comm, comm)))

    grad_traceless = grad_f - np.trace(grad_f) / d * np.eye(d)
    col_scale = float(np.linalg.norm(mat - np.eye(d) / d) * np.linalg.norm(grad_traceless))
    if abs(drive) <= tol * float(np.linalg.norm(grad_f) * np.linalg.norm(L)):
        return ControlField.zero(d)
    if np.sqrt(comm_sq) <= tol * col_scale:
        raise BreakdownPoint(message=f"[rho, grad f] vanishes while <grad f, L_D rho>={drive:.3e}")

    H = 1j * drive * comm / comm_sq
    H = 0.5 * (H + H.conj().T)
    residual = hs_inner(grad_f, -1j * commutator(H, mat) + L)
    near = np.sqrt(comm_sq) <= NEAR_BREAKDOWN_FACTOR * tol * col_scale
    return ControlField.from_matrix(H, near_breakdown=near, constraint_residual=residual)


def relevant_parameter_count(
    rho: Union[DensityMatrix, np.ndarray], grad_f: np.ndarray, tol: float = GROUP_TOL
) -> int:
    """Number of control parameters that enter the constraint, d - m_0.

    m_0 is the multiplicity of the zero eigenvalue of i[rho, grad f].
    """
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    grad_f = np.asarray(grad_f, dtype=complex)
    generator = 1j * commutator(mat, grad_f)
    scale = float(np.linalg.norm(mat) * np.linalg.norm(grad_f))
    eigenvalues = np.linalg.eigvalsh(0.5 * (generator + generator.conj().T))
    m0 = int(np.sum(np.abs(eigenvalues) <= tol * max(scale, np.finfo(float).tiny)))
    return mat.shape[0] - m0


def fixed_p_control(
    w: Union[StateVector, np.ndarray],
    v: StateVector,
    D: Dissipator,
    tol: float = COLLINEARITY_TOL,
) -> ControlField:
    """Fidelity-preserving control that keeps the direction p of v's component orthogonal to w.

    With v = alpha_w w + alpha_p p, the control makes dv/dt = alpha_p' p where
    alpha_p alpha_p' = v . (R v + c). The coefficients are solved in the orthonormal frame
    {w, p, w x p}.

    Raises:
        InvalidReference: If |w| != 1
        BreakdownPoint: If v is collinear with w
    """
    if isinstance(w, StateVector):
        w = w.to_convention("bloch").coords
    w = np.asarray(w, dtype=float)
    if abs(float(np.linalg.norm(w)) - 1.0) > 1e-9:
        raise InvalidReference(message="fixed-p control requires a pure reference, |w| = 1")
    D = D.to_convention("bloch")
    coords = v.to_convention("bloch").coords

    alpha_w = float(coords @ w)
    perp = coords - alpha_w * w
    alpha_p = float(np.linalg.norm(perp))
    if alpha_p <= tol * max(1.0, float(np.linalg.norm(coords))):
        raise BreakdownPoint(message=f"State is collinear with the reference [alpha_p={alpha_p:.3e}]")
    p = perp / alpha_p

    frame = np.stack([w, p, np.cross(w, p)])
    drift = D.apply(coords)
    alpha_p_dot = float(coords @ drift) / alpha_p
    target = frame @ (alpha_p_dot * p - drift)
    # 2 h' x v' = target with v' = (alpha_w, alpha_p, 0)
    v_frame = np.array([alpha_w, alpha_p, 0.0])
    skew = np.array(
        [[0.0, -v_frame[2], v_frame[1]], [v_frame[2], 0.0, -v_frame[0]], [-v_frame[1], v_frame[0], 0.0]]
    )
    h_frame, *_ = np.linalg.lstsq(-2.0 * skew, target, rcond=None)
    h = frame.T @ h_frame

    grad = 0.5 * w
    residual = float(grad @ (2.0 * np.cross(h, coords) + drift))
    near = alpha_p <= NEAR_BREAKDOWN_FACTOR * tol * max(1.0, float(np.linalg.norm(coords)))
    return ControlField.from_bloch(
        h, alphas=decompose_control(h, grad, coords), near_breakdown=near, constraint_residual=residual
    )


def solve_commutator_equation(
    rho: np.ndarray,
    target: np.ndarray,
    gap_tol: float = GROUP_TOL,
    block_tol: float = BLOCK_TOL,
    scale: Optional[float] = None,
) -> np.ndarray:
    """Hermitian H with -i[H, rho] = target, built entry-wise in the eigenbasis of rho.

    h_jk = -i target_jk / (lambda_j - lambda_k) across distinct eigenvalue groups; entries
    inside one group must vanish.

    Raises:
        NotRealizable: If target has a block inside a degenerate eigenspace of rho
    """
    spectrum = eigendecompose_grouped(rho, gap_tol)
    vectors = np.concatenate(spectrum.eigenvectors, axis=1)
    labels = np.concatenate([np.full(block.shape[1], i) for i, block in enumerate(spectrum.eigenvectors)])
    values = spectrum.eigenvalues[labels]

    local = vectors.conj().T @ np.asarray(target, dtype=complex) @ vectors
    same = labels[:, None] == labels[None, :]
    scale = scale if scale is not None else max(float(np.linalg.norm(target)), np.finfo(float).tiny)
    block_residual = float(np.abs(local[same]).max()) if same.any() else 0.0
    if block_residual > block_tol * max(scale, 1e-12):
        raise NotRealizable(
            message=f"Degenerate eigenspace block does not vanish [block={block_residual:.3e}, scale={scale:.3e}]"
        )

    gaps = values[:, None] - values[None, :]
    H_local = np.zeros_like(local)
    H_local[~same] = -1j * local[~same] / gaps[~same]
    H = vectors @ H_local @ vectors.conj().T
    return 0.5 * (H + H.conj().T)


def trajectory_control(
    path: "TimedTrajectory",
    source: Union[Dissipator, Sequence[LindbladTerm]],
    block_tol: float = BLOCK_TOL,
) -> List[ControlField]:
    """Per-sample Hamiltonian realizing a time-parametrized trajectory.

    Solves -i[H, rho] = rho_dot - L_D(rho) at every sample.

    Raises:
        NotRealizable: If the demand has a component inside a degenerate eigenspace
    """
    basis = build_nice_basis(path.dim)
    coords, velocities = path.coherence_coords()

    def solve(index: int) -> ControlField:
        rho = np.eye(path.dim, dtype=complex) / path.dim + basis.expand(coords[index])
        rho_dot = basis.expand(velocities[index])
        drift = dissipator_action(source, rho)
        scale = max(float(np.linalg.norm(rho_dot)), float(np.linalg.norm(drift)))
        try:
            H = solve_commutator_equation(rho, rho_dot - drift, block_tol=block_tol, scale=scale)
        except NotRealizable as exc:
            raise NotRealizable(message=f"t={path.times[index]:.6g}: {exc.message}") from exc
        return ControlField.from_matrix(H)

    controls = map_ordered(solve, list(range(len(path.times))))
    logger.debug(f"Synthesized trajectory controls [samples={len(controls)}, dim={path.dim}]")
    return controls


@dataclass(frozen=True)
class SteeringLaw:
    """Coherence-preserving bit-flip control that steers the state onto the x-axis.

    The designed path keeps f = f0 on the cylinder while rotating the azimuth phi
    (measured from the y-axis) to the nearest x-axis point and letting v_z decay as
    v_z(0) sqrt(1 - u):

        l(u) = (sqrt(f0) sin(phi0 + dphi u), sqrt(f0) cos(phi0 + dphi u), v_z(0) sqrt(1 - u))

    The feedback uses alpha_3 = -gamma v_y^2 / (2 f0 v_z^2) and the alpha_2 that keeps the
    state on l(u).
    """

    gamma: float
    f0: float
    vz0: float
    phi0: float
    delta_phi: float
    already_stable: bool = False

    def path(self, u: Union[float, np.ndarray]) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        phi = self.phi0 + self.delta_phi * u
        radius = np.sqrt(self.f0)
        vz = self.vz0 * np.sqrt(np.clip(1.0 - u, 0.0, None))
        return np.stack([radius * np.sin(phi), radius * np.cos(phi), vz], axis=-1)

    def path_derivative(self, u: Union[float, np.ndarray]) -> np.ndarray:
        """dl/du; the z-component diverges at u = 1."""
        u = np.asarray(u, dtype=float)
        phi = self.phi0 + self.delta_phi * u
        radius = np.sqrt(self.f0) * self.delta_phi
        with np.errstate(divide="ignore"):
            dvz = -0.5 * self.vz0 / np.sqrt(np.clip(1.0 - u, 0.0, None))
        return np.stack([radius * np.cos(phi), -radius * np.sin(phi), dvz], axis=-1)

    def rate(self, u: Union[float, np.ndarray]) -> np.ndarray:
        """c(u) = dt/du = v_z(0)^2 / (4 gamma (l_y^2 + l_z^2)); diverges at u = 1."""
        l = self.path(u)
        with np.errstate(divide="ignore"):
            return self.vz0**2 / (4.0 * self.gamma * (l[..., 1] ** 2 + l[..., 2] ** 2))

    def alphas(self, coords: np.ndarray) -> Tuple[float, float]:
        vx, vy, vz = coords
        if self.already_stable or (vy == 0.0 and vz == 0.0):
            return 0.0, 0.0
        if vz == 0.0:
            return 0.0, float(np.inf)
        alpha3 = -0.5 * self.gamma * vy**2 / (self.f0 * vz**2)
        alpha2 = (self.gamma / (2.0 * vz)) * (
            2.0 * self.delta_phi * (vy**2 + vz**2) / self.vz0**2 - vx * vy / self.f0
        )
        return float(alpha2), float(alpha3)

    def control(self, v: StateVector) -> ControlField:
        coords = v.to_convention("bloch").coords
        alpha2, alpha3 = self.alphas(coords)
        if not np.isfinite(alpha3):
            return ControlField.unbounded(2)
        grad = np.array([2.0 * coords[0], 2.0 * coords[1], 0.0])
        h = alpha2 * grad + alpha3 * np.cross(grad, coords)
        return ControlField.from_bloch(h, alphas=(0.0, alpha2, alpha3))


def bit_flip_rate(D: Dissipator) -> float:
    """gamma of a bit-flip dissipator, R = diag(0, -2 gamma, -2 gamma) and c = 0.

    Raises:
        UnsupportedScenario: If D is not a bit-flip channel
    """
    D = D.to_convention("bloch")
    gamma = -0.5 * float(D.R[1, 1])
    expected = np.diag([0.0, -2.0 * gamma, -2.0 * gamma])
    if D.dim != 2 or gamma <= 0 or not np.allclose(D.R, expected, atol=1e-12) or D.c_norm > 1e-12:
        raise UnsupportedScenario(message="alpha_2 steering is defined for the bit-flip channel only")
    return gamma


def alpha2_steering(v0: StateVector, D: Dissipator, f0: Optional[float] = None) -> SteeringLaw:
    """Build the steering law that drives a bit-flip coherence run onto the x-axis.

    Raises:
        UnsupportedScenario: If D is not a bit-flip channel or v0 has no coherence
        BreakdownPoint: If v0 lies in the (x, y) plane off the x-axis
    """
    gamma = bit_flip_rate(D)
    vx, vy, vz = v0.to_convention("bloch").coords
    f0 = float(vx**2 + vy**2) if f0 is None else float(f0)
    if vy == 0.0 and vz == 0.0:
        return SteeringLaw(gamma=gamma, f0=f0, vz0=0.0, phi0=0.0, delta_phi=0.0, already_stable=True)
    if vz == 0.0:
        raise BreakdownPoint(message="alpha_2 steering needs v_z(0) != 0")
    if f0 <= 0:
        raise UnsupportedScenario(message="alpha_2 steering needs a nonzero coherence f0")

    phi0 = float(np.arctan2(vx, vy))
    phi_end = np.pi / 2 if vx >= 0 else -np.pi / 2
    logger.debug(f"Built alpha_2 steering law [gamma={gamma}, f0={f0:.6g}, phi0={phi0:.6g}]")
    return SteeringLaw(gamma=gamma, f0=f0, vz0=float(vz), phi0=phi0, delta_phi=float(phi_end - phi0))
