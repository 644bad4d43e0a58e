"""Target properties with analytic gradients, and pointwise controllability classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np

from qpp.constants import COLLINEARITY_TOL, ENTROPY_PURE_GUARD
from qpp.core.channels import Dissipator, LindbladTerm, dissipator_action, dissipator_from_lindblad
from qpp.core.exceptions import (
    DimensionMismatch,
    GradientUndefined,
    InvalidReference,
    NotHermitian,
)
from qpp.core.operator_space import (
    BLOCH_SCALE,
    Convention,
    DensityMatrix,
    OperatorBasis,
    StateVector,
    build_nice_basis,
    commutator,
    hs_inner,
    is_hermitian,
)

ClassKind = Literal["trivially_controllable", "uncontrollable", "controllable"]


@dataclass(frozen=True, eq=False)
class TargetProperty:
    """Scalar property f(v) with its analytic gradient.

    `value_fn`, `gradient_fn` and `guard_fn` act on raw coordinates in the
    property's own convention; the public methods accept StateVectors in any
    convention and convert.
    """

    name: str
    dim: int
    convention: Convention
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    reference: Optional[np.ndarray] = None
    guard_fn: Optional[Callable[[np.ndarray], bool]] = None
    scale: float = 1.0

    def _coords(self, state: StateVector) -> np.ndarray:
        if state.dim != self.dim:
            raise DimensionMismatch(message=f"Property {self.name} is defined for d={self.dim}, got d={state.dim}")
        return state.to_convention(self.convention).coords

    def evaluate(self, state: StateVector) -> float:
        return self.scale * float(self.value_fn(self._coords(state)))

    def domain_ok(self, state: StateVector) -> bool:
        return self.guard_fn is None or bool(self.guard_fn(self._coords(state)))

    def gradient_at(self, coords: np.ndarray, convention: Optional[Convention] = None) -> np.ndarray:
        """Gradient at raw coordinates given (and returned) in `convention`."""
        convention = convention or self.convention
        own = coords
        if convention != self.convention:
            own = coords * (BLOCH_SCALE if self.convention == "bloch" else 1.0 / BLOCH_SCALE)
        if self.guard_fn is not None and not self.guard_fn(own):
            raise GradientUndefined(message=f"Gradient of {self.name} is undefined at this state")
        grad = self.scale * np.asarray(self.gradient_fn(own), dtype=float)
        if convention != self.convention:
            # d f / d v_coh = sqrt(2) d f / d v_bloch
            grad = grad * (BLOCH_SCALE if convention == "coherence" else 1.0 / BLOCH_SCALE)
        return grad

    def value_at(self, coords: np.ndarray, convention: Optional[Convention] = None) -> float:
        convention = convention or self.convention
        if convention != self.convention:
            coords = coords * (BLOCH_SCALE if self.convention == "bloch" else 1.0 / BLOCH_SCALE)
        return self.scale * float(self.value_fn(coords))

    def gradient(self, state: StateVector, convention: Optional[Convention] = None) -> np.ndarray:
        """Gradient with respect to the coordinates of `convention` (default: the property's).

        Raises:
            GradientUndefined: If the state fails the domain guard
        """
        self._coords(state)
        convention = convention or self.convention
        return self.gradient_at(state.to_convention(convention).coords, convention)

    def gradient_matrix(self, state: StateVector, basis: Optional[OperatorBasis] = None) -> np.ndarray:
        """Matrix gradient sum_j (df/dv_j) F_j in the coherence convention."""
        basis = basis or build_nice_basis(self.dim)
        return basis.expand(self.gradient(state, "coherence"))

    def scaled(self, factor: float) -> "TargetProperty":
        return replace(self, scale=self.scale * factor, name=f"{factor:g}*{self.name}")


def coherence_property() -> TargetProperty:
    """Coherence magnitude f = v_x^2 + v_y^2 (qubit, bloch convention)."""
    return TargetProperty(
        name="coherence",
        dim=2,
        convention="bloch",
        value_fn=lambda v: v[0] ** 2 + v[1] ** 2,
        gradient_fn=lambda v: np.array([2.0 * v[0], 2.0 * v[1], 0.0]),
    )


def fidelity_property(w: Union[StateVector, Sequence[float]]) -> TargetProperty:
    """Squared Uhlmann fidelity to the reference Bloch vector w.

    F^2 = 1/2 (1 + v.w + sqrt((1 - |v|^2)(1 - |w|^2))), gradient 1/2 (w - k0 v) with
    k0 = sqrt((1 - |w|^2) / (1 - |v|^2)). For |w| = 1 the gradient is w/2 everywhere.

    Raises:
        InvalidReference: If |w| > 1
    """
    if isinstance(w, StateVector):
        w = w.to_convention("bloch").coords
    w = np.array(w, dtype=float).reshape(3)
    w_norm_sq = float(w @ w)
    if w_norm_sq > 1.0 + 1e-12:
        raise InvalidReference(message=f"Reference Bloch vector has norm {np.sqrt(w_norm_sq):.6g} > 1")
    w.setflags(write=False)
    w_mixed = max(0.0, 1.0 - w_norm_sq)
    pure_reference = w_mixed <= 1e-12

    def value(v: np.ndarray) -> float:
        mixed = max(0.0, 1.0 - float(v @ v)) * w_mixed
        return 0.5 * (1.0 + float(v @ w) + np.sqrt(mixed))

    def gradient(v: np.ndarray) -> np.ndarray:
        if pure_reference:
            return 0.5 * w
        k0 = np.sqrt(w_mixed / (1.0 - float(v @ v)))
        return 0.5 * (w - k0 * v)

    def guard(v: np.ndarray) -> bool:
        return pure_reference or float(v @ v) < 1.0 - 1e-12

    return TargetProperty(
        name="fidelity",
        dim=2,
        convention="bloch",
        value_fn=value,
        gradient_fn=gradient,
        reference=w,
        guard_fn=guard,
    )


def purity_property(dim: int = 2) -> TargetProperty:
    """Purity P = 1/d + |v|^2 in the coherence convention (any d)."""
    return TargetProperty(
        name="purity",
        dim=dim,
        convention="coherence",
        value_fn=lambda v: 1.0 / dim + float(v @ v),
        gradient_fn=lambda v: 2.0 * v,
    )


def bloch_component_property(axis: int = 2) -> TargetProperty:
    """f = v_axis (bloch convention); `custom-vz` is axis 2."""
    unit = np.zeros(3)
    unit[axis] = 1.0
    return TargetProperty(
        name="custom-vz" if axis == 2 else f"bloch-{'xyz'[axis]}",
        dim=2,
        convention="bloch",
        value_fn=lambda v: float(v[axis]),
        gradient_fn=lambda v: unit.copy(),
    )


def population_property(dim: int, level: int = 0) -> TargetProperty:
    """Population <k|rho|k> of a basis level, linear in the coherence vector."""
    basis = build_nice_basis(dim)
    weights = basis.traceless[:, level, level].real.copy()
    return TargetProperty(
        name=f"population-{level}",
        dim=dim,
        convention="coherence",
        value_fn=lambda v: 1.0 / dim + float(weights @ v),
        gradient_fn=lambda v: weights.copy(),
    )


def entropy_property(order: float = 1.0) -> TargetProperty:
    """Qubit Renyi entropy of the given order (order 1 is the von Neumann entropy).

    Depends on the state only through r = |v| (bloch), with eigenvalues (1 +- r)/2.
    """
    if order <= 0:
        raise ValueError(f"Entropy order must be > 0, got {order}")

    def eigen(r: float):
        return 0.5 * (1.0 + r), 0.5 * (1.0 - r)

    def value(v: np.ndarray) -> float:
        lp, lm = eigen(float(np.linalg.norm(v)))
        if order == 1.0:
            return -sum(x * np.log(x) for x in (lp, lm) if x > 0)
        return float(np.log(lp**order + lm**order) / (1.0 - order))

    def radial_over_r(r: float) -> float:
        # (dS/dr) / r with the r -> 0 limit -order
        if r < 1e-6:
            return -order
        if order == 1.0:
            return -float(np.arctanh(r)) / r
        lp, lm = eigen(r)
        dsdr = (order / (2.0 * (1.0 - order))) * (lp ** (order - 1) - lm ** (order - 1)) / (lp**order + lm**order)
        return dsdr / r

    def gradient(v: np.ndarray) -> np.ndarray:
        return radial_over_r(float(np.linalg.norm(v))) * v

    def guard(v: np.ndarray) -> bool:
        return order > 1.0 or float(np.linalg.norm(v)) <= 1.0 - ENTROPY_PURE_GUARD

    name = "von-neumann-entropy" if order == 1.0 else f"renyi-{order:g}-entropy"
    return TargetProperty(name=name, dim=2, convention="bloch", value_fn=value, gradient_fn=gradient, guard_fn=guard)


@dataclass(frozen=True)
class PropertyClass:
    """Controllability class of (f, D) at a state, with the diagnostics used to decide it."""

    kind: ClassKind
    alignment: float
    collinearity: float
    alignment_scale: float
    collinearity_scale: float

    @property
    def residual_ratio(self) -> float:
        """Collinearity residual relative to its scale (0 means collinear)."""
        if self.collinearity_scale == 0.0:
            return 0.0
        return self.collinearity / self.collinearity_scale


def _alignment_scale(grad_norm: float, D: Dissipator, state_norm: float) -> float:
    """|grad f| (|R| |v| + |c|); unchanged by the bloch/coherence rescaling."""
    return grad_norm * (D.r_norm * state_norm + D.c_norm)


def _commutator_scale(a_norm: float, b_norm: float) -> float:
    # |[A, B]|_F <= sqrt(2) |A|_F |B|_F; for qubits the ratio equals |grad f x v| / (|grad f| |v|)
    return math.sqrt(2.0) * a_norm * b_norm


def _decide(alignment: float, align_scale: float, residual: float, col_scale: float, tol: float) -> ClassKind:
    if abs(alignment) <= tol * align_scale:
        return "trivially_controllable"
    if residual <= tol * col_scale:
        return "uncontrollable"
    return "controllable"


def classify_at(
    f: TargetProperty, D: Dissipator, v: StateVector, tol: float = COLLINEARITY_TOL
) -> PropertyClass:
    """Classify controllability of f under D at the state v.

    Trivially controllable when |grad f . (R v + c)| <= tol * |grad f| (|R| |v| + |c|).
    Otherwise uncontrollable when grad f is collinear with v (qubits: |grad f x v| <=
    tol |grad f| |v|; d > 2: |[rho, grad f]| <= tol sqrt(2) |rho - I/d| |grad f|), else
    controllable. `classify_general` uses the same scales, so both agree on qubits.

    Raises:
        GradientUndefined: If v fails the property's domain guard
    """
    coords = v.to_convention(D.convention).coords
    grad = f.gradient(v, D.convention)
    alignment = float(grad @ D.apply(coords))
    grad_norm = float(np.linalg.norm(grad))
    align_scale = _alignment_scale(grad_norm, D, float(np.linalg.norm(coords)))

    if D.dim == 2:
        residual = float(np.linalg.norm(np.cross(grad, coords)))
        col_scale = grad_norm * float(np.linalg.norm(coords))
    else:
        basis = build_nice_basis(D.dim)
        coh = v.to_convention("coherence").coords
        g_coh = f.gradient(v, "coherence")
        residual = float(np.linalg.norm(commutator(basis.expand(coh), basis.expand(g_coh))))
        col_scale = _commutator_scale(float(np.linalg.norm(coh)), float(np.linalg.norm(g_coh)))

    kind = _decide(alignment, align_scale, residual, col_scale, tol)
    return PropertyClass(kind, alignment, residual, align_scale, col_scale)


def classify_general(
    grad_f: np.ndarray,
    source: Union[Dissipator, Sequence[LindbladTerm]],
    rho: Union[DensityMatrix, np.ndarray],
    tol: float = COLLINEARITY_TOL,
) -> PropertyClass:
    """Matrix-form classification using <grad f, L_D rho> and |[rho, grad f]|.

    Raises:
        GradientUndefined: If grad_f is not a Hermitian matrix
    """
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    grad_f = np.asarray(grad_f, dtype=complex)
    if grad_f.shape != mat.shape:
        raise DimensionMismatch(message=f"Gradient {grad_f.shape} does not match state {mat.shape}")
    if not is_hermitian(grad_f):
        raise GradientUndefined(message="Matrix gradient must be Hermitian", suggestion=NotHermitian.suggestion)

    d = mat.shape[0]
    identity = np.eye(d)
    D = source if isinstance(source, Dissipator) else dissipator_from_lindblad(source)
    if D.dim != d:
        raise DimensionMismatch(message=f"Dissipator dim={D.dim} does not match state dim={d}")
    L = dissipator_action(source, mat)
    alignment = hs_inner(grad_f, L)
    # the identity component of grad f pairs with nothing: L_D rho and [rho, .] are traceless
    grad_norm = float(np.linalg.norm(grad_f - np.trace(grad_f).real / d * identity))
    state_norm = float(np.linalg.norm(mat - identity / d))
    align_scale = _alignment_scale(grad_norm, D.to_convention("coherence"), state_norm)
    residual = float(np.linalg.norm(commutator(mat, grad_f)))
    col_scale = _commutator_scale(state_norm, grad_norm)

    kind = _decide(alignment, align_scale, residual, col_scale, tol)
    return PropertyClass(kind, alignment, residual, align_scale, col_scale)
