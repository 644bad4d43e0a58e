"""Noise channels in Lindblad form and in (R, c) coherence-vector form."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator
from scipy.special import expit

from qpp.common.logging import logger
from qpp.constants import RELAXATION_A_CAP, TRACE_TOL
from qpp.core.exceptions import DimensionMismatch, InvalidLindbladOperator, InvalidState
from qpp.core.operator_space import (
    BLOCH_SCALE,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    SIGMA_MINUS,
    SIGMA_PLUS,
    Convention,
    DensityMatrix,
    OperatorBasis,
    StateVector,
    build_nice_basis,
)

ChannelKind = Literal[
    "dephasing",
    "bit_flip",
    "bit_phase_flip",
    "depolarizing",
    "relaxation",
    "relaxation_dephasing",
    "qudit_dephasing",
    "qudit_decay",
    "custom",
]

_QUBIT_KINDS = (
    "dephasing",
    "bit_flip",
    "bit_phase_flip",
    "depolarizing",
    "relaxation",
    "relaxation_dephasing",
)

# Axis left untouched by the single-Pauli channels
PAULI_CHANNEL_AXIS = {"bit_flip": 0, "bit_phase_flip": 1, "dephasing": 2}


@dataclass(frozen=True, eq=False)
class LindbladTerm:
    """A single jump operator L with rate gamma >= 0."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise InvalidLindbladOperator(message=f"Lindblad operator must be square, got shape={op.shape}")
        trace = np.trace(op)
        if abs(trace) > TRACE_TOL * max(1.0, float(np.linalg.norm(op))):
            raise InvalidLindbladOperator(message=f"Lindblad operator must be traceless, got Tr L={trace:.3e}")
        if not math.isfinite(self.rate) or self.rate < 0:
            raise InvalidLindbladOperator(message=f"Lindblad rate must be >= 0, got {self.rate}")
        op = op.copy()
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def dim(self) -> int:
        return self.operator.shape[0]


class ChannelSpec(BaseModel):
    """Parametrized built-in noise channel (or an explicit list of Lindblad terms)."""

    model_config = ConfigDict(extra="forbid", frozen=True, arbitrary_types_allowed=True)

    kind: ChannelKind = Field(description="Channel family")
    gamma: Optional[PositiveFloat] = Field(default=None, description="Channel rate (1/time)")
    gamma1: Optional[PositiveFloat] = Field(default=None, description="Relaxation rate (1/time)")
    gamma_d: Optional[NonNegativeFloat] = Field(default=None, description="Dephasing rate (1/time)")
    beta_delta: NonNegativeFloat = Field(default=0.0, description="Inverse temperature x level gap")
    dim: int = Field(default=2, ge=2, description="Hilbert-space dimension")
    levels: Optional[Tuple[int, int]] = Field(default=None, description="Levels (i, j) for qudit channels")
    terms: Optional[Tuple[LindbladTerm, ...]] = Field(default=None, description="Custom Lindblad terms")

    @model_validator(mode="after")
    def _check_parameters(self) -> "ChannelSpec":
        if self.kind in _QUBIT_KINDS and self.dim != 2:
            raise ValueError(f"channel kind={self.kind} is only defined for dim=2")
        if self.kind == "relaxation_dephasing":
            if self.gamma1 is None or self.gamma_d is None:
                raise ValueError("relaxation_dephasing requires gamma1 and gamma_d")
        elif self.kind == "custom":
            if not self.terms:
                raise ValueError("custom channels require at least one Lindblad term")
            if any(t.dim != self.dim for t in self.terms):
                raise ValueError(f"custom Lindblad terms must all be {self.dim}x{self.dim}")
        elif self.gamma is None:
            raise ValueError(f"channel kind={self.kind} requires gamma")
        if self.kind in ("qudit_dephasing", "qudit_decay"):
            if self.levels is None:
                raise ValueError(f"channel kind={self.kind} requires levels")
            i, j = self.levels
            if i == j or not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ValueError(f"levels must be two distinct indices below dim={self.dim}")
        return self

    @property
    def a(self) -> float:
        """Thermal offset a = 1/(1 + exp(-beta_delta)) - 1/2, capped below 1/2."""
        return float(min(expit(self.beta_delta) - 0.5, RELAXATION_A_CAP))

    @property
    def p0(self) -> float:
        """Ground-state thermal population."""
        return self.a + 0.5

    @property
    def relaxation_rate(self) -> float:
        """gamma_1 (relaxation kinds only)."""
        return float(self.gamma1 if self.kind == "relaxation_dephasing" else self.gamma)

    @property
    def dephasing_rate(self) -> float:
        return float(self.gamma_d or 0.0) if self.kind == "relaxation_dephasing" else 0.0

    @property
    def gamma2(self) -> float:
        """Transverse rate gamma_2 = 2 gamma_d + gamma_1 / 2 (relaxation kinds)."""
        return 2.0 * self.dephasing_rate + 0.5 * self.relaxation_rate


@dataclass(frozen=True, eq=False)
class Dissipator:
    """Dissipative part of the coherence-vector equation, dv/dt = ... + R v + c."""

    R: np.ndarray
    c: np.ndarray
    dim: int
    convention: Convention = "coherence"
    source: Optional[Tuple[LindbladTerm, ...]] = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.dim * self.dim - 1
        if R.shape != (n, n) or c.shape != (n,):
            raise DimensionMismatch(
                message=f"Dissipator for d={self.dim} needs R {n}x{n} and c of length {n}, "
                f"got R {R.shape} and c {c.shape}"
            )
        if self.convention == "bloch" and self.dim != 2:
            raise InvalidState(message="The bloch convention is only defined for qubits")
        for name, arr in (("R", R), ("c", c)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.source is not None:
            object.__setattr__(self, "source", tuple(self.source))

    @property
    def size(self) -> int:
        return self.dim * self.dim - 1

    @property
    def r_norm(self) -> float:
        """Spectral norm of R."""
        return float(np.linalg.norm(self.R, 2))

    @property
    def c_norm(self) -> float:
        return float(np.linalg.norm(self.c))

    @property
    def rate_scale(self) -> float:
        return max(self.r_norm, self.c_norm)

    @property
    def is_unital(self) -> bool:
        if self.source is not None:
            identity = np.eye(self.dim, dtype=complex)
            return float(np.linalg.norm(lindblad_action(self.source, identity))) <= TRACE_TOL
        return self.c_norm <= TRACE_TOL

    def apply(self, coords: np.ndarray) -> np.ndarray:
        """R v + c for raw coordinates in this dissipator's convention."""
        return self.R @ coords + self.c

    def to_convention(self, convention: Convention) -> "Dissipator":
        """Same channel acting on coordinates in `convention` (qubits only for bloch).

        R is invariant under the rescaling; c scales like the coordinates.
        """
        if convention == self.convention:
            return self
        if self.dim != 2:
            raise InvalidState(message="The bloch convention is only defined for qubits")
        factor = BLOCH_SCALE if convention == "bloch" else 1.0 / BLOCH_SCALE
        return Dissipator(R=self.R, c=self.c * factor, dim=2, convention=convention, source=self.source)

    def action(self, rho: np.ndarray, basis: Optional[OperatorBasis] = None) -> np.ndarray:
        """L_D(rho) as a matrix, reconstructed from (R, c)."""
        basis = basis or build_nice_basis(self.dim)
        coh = self.to_convention("coherence")
        return basis.expand(coh.apply(basis.coordinates(rho)))

    def __add__(self, other: "Dissipator") -> "Dissipator":
        if other.dim != self.dim:
            raise DimensionMismatch(message=f"Cannot add dissipators with d={self.dim} and d={other.dim}")
        other = other.to_convention(self.convention)
        source = None
        if self.source is not None and other.source is not None:
            source = self.source + other.source
        return Dissipator(R=self.R + other.R, c=self.c + other.c, dim=self.dim, convention=self.convention, source=source)


def lindblad_action(terms: Sequence[LindbladTerm], rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    """L_D(rho) = sum_a gamma_a (L rho L^dagger - 1/2 {L^dagger L, rho}).

    Also accepts arbitrary (non-state) matrices, the map being linear.

    Raises:
        DimensionMismatch: If an operator and rho have different dimensions
    """
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    out = np.zeros_like(mat, dtype=complex)
    for term in terms:
        L = term.operator
        if L.shape != mat.shape:
            raise DimensionMismatch(message=f"Lindblad operator {L.shape} does not match state {mat.shape}")
        LdL = L.conj().T @ L
        out += term.rate * (L @ mat @ L.conj().T - 0.5 * (LdL @ mat + mat @ LdL))
    return out


def dissipator_action(
    source: Union[Dissipator, Sequence[LindbladTerm]], rho: Union[DensityMatrix, np.ndarray]
) -> np.ndarray:
    """L_D(rho) from either a Dissipator or its Lindblad terms."""
    if isinstance(source, Dissipator):
        mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        return source.action(mat)
    return lindblad_action(source, rho)


def dissipator_from_lindblad(
    terms: Sequence[LindbladTerm],
    basis: Optional[OperatorBasis] = None,
    convention: Convention = "coherence",
) -> Dissipator:
    """(R, c) with R_ij = Tr[F_i L_D(F_j)] and c_j = Tr[F_j L_D(I)] / d.

    Args:
        terms: Lindblad terms, all d x d and traceless
        basis: Nice operator basis (defaults to the Gell-Mann basis)
        convention: Output convention; `bloch` rescales c for qubits

    Returns:
        Dissipator carrying `terms` as its source

    Raises:
        InvalidLindbladOperator: If no terms are given
        DimensionMismatch: If the terms and basis dimensions differ
    """
    terms = tuple(terms)
    if not terms:
        raise InvalidLindbladOperator(message="At least one Lindblad term is required")
    d = terms[0].dim
    basis = basis or build_nice_basis(d)
    if basis.dim != d:
        raise DimensionMismatch(message=f"Lindblad operators are {d}x{d} but basis has dim={basis.dim}")

    images = np.stack([lindblad_action(terms, F) for F in basis.traceless])
    R = np.einsum("iab,jba->ij", basis.traceless, images).real
    c = basis.coordinates(lindblad_action(terms, np.eye(d, dtype=complex))) / d
    D = Dissipator(R=R, c=c, dim=d, convention="coherence", source=terms)
    logger.debug(f"Built dissipator from Lindblad form [dim={d}, terms={len(terms)}, unital={D.is_unital}]")
    return D.to_convention(convention)


def lindblad_terms(spec: ChannelSpec) -> List[LindbladTerm]:
    """Lindblad form of a built-in channel."""
    kind = spec.kind
    if kind == "custom":
        return list(spec.terms)
    if kind == "dephasing":
        return [LindbladTerm(PAULI_Z, spec.gamma)]
    if kind == "bit_flip":
        return [LindbladTerm(PAULI_X, spec.gamma)]
    if kind == "bit_phase_flip":
        return [LindbladTerm(PAULI_Y, spec.gamma)]
    if kind == "depolarizing":
        return [LindbladTerm(P, spec.gamma / 3.0) for P in (PAULI_X, PAULI_Y, PAULI_Z)]
    if kind in ("relaxation", "relaxation_dephasing"):
        gamma1 = spec.relaxation_rate
        terms = [
            LindbladTerm(SIGMA_MINUS, gamma1 * spec.p0),
            LindbladTerm(SIGMA_PLUS, gamma1 * (1.0 - spec.p0)),
        ]
        if spec.dephasing_rate > 0:
            terms.append(LindbladTerm(PAULI_Z, spec.dephasing_rate))
        return terms

    i, j = spec.levels
    op = np.zeros((spec.dim, spec.dim), dtype=complex)
    if kind == "qudit_dephasing":
        op[i, i], op[j, j] = 1.0, -1.0
    else:
        op[i, j] = 1.0
    return [LindbladTerm(op, spec.gamma)]


def _qubit_table(spec: ChannelSpec) -> Tuple[np.ndarray, np.ndarray]:
    zero = np.zeros(3)
    if spec.kind in PAULI_CHANNEL_AXIS:
        diag = np.full(3, -2.0 * spec.gamma)
        diag[PAULI_CHANNEL_AXIS[spec.kind]] = 0.0
        return np.diag(diag), zero
    if spec.kind == "depolarizing":
        return -(4.0 / 3.0) * spec.gamma * np.eye(3), zero
    gamma1, gamma2 = spec.relaxation_rate, spec.gamma2
    return np.diag([-gamma2, -gamma2, -gamma1]), np.array([0.0, 0.0, 2.0 * gamma1 * spec.a])


def builtin_dissipator(spec: ChannelSpec) -> Dissipator:
    """Closed-form (R, c) of a built-in channel.

    Qubit channels are returned in the bloch convention; qudit and custom channels
    are built from their Lindblad form in the coherence convention.
    """
    terms = tuple(lindblad_terms(spec))
    if spec.kind in _QUBIT_KINDS:
        R, c = _qubit_table(spec)
        return Dissipator(R=R, c=c, dim=2, convention="bloch", source=terms)
    return dissipator_from_lindblad(terms)


def apply_dissipator(D: Dissipator, v: StateVector) -> np.ndarray:
    """R v + c, with v converted to the dissipator's convention.

    Raises:
        DimensionMismatch: If v and D have different dimensions
    """
    if v.dim != D.dim:
        raise DimensionMismatch(message=f"State dim={v.dim} does not match dissipator dim={D.dim}")
    return D.apply(v.to_convention(D.convention).coords)
