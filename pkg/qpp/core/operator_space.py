"""State and operator representations.

Density matrices are expanded in a *nice* operator basis {F_0 = I/sqrt(d), F_1, ..., F_J}
of orthonormal Hermitian matrices; the traceless coordinates v_j = Tr(rho F_j) form the
coherence vector. For qubits the Bloch vector is the same vector in the unnormalized
Pauli convention, b = sqrt(2) * v.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Literal, Optional

import cachetools
import numpy as np

from qpp.common.logging import logger
from qpp.constants import GROUP_TOL, HERMITIAN_TOL, POSITIVITY_SLACK, TRACE_TOL
from qpp.core.exceptions import (
    DimensionMismatch,
    InvalidDimension,
    InvalidState,
    NotHermitian,
    PositivityViolation,
)

Convention = Literal["coherence", "bloch"]

# Bloch coordinates are sqrt(2) times the coherence coordinates of a qubit
BLOCH_SCALE = float(np.sqrt(2.0))

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|


def _frozen(array: np.ndarray, dtype=None) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product Re Tr(a^dagger b)."""
    return float(np.real(np.vdot(a, b)))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(1.0, float(np.linalg.norm(a)))
    return float(np.linalg.norm(a - a.conj().T)) <= tol * scale


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Orthonormal Hermitian basis with F_0 = I/sqrt(d) and traceless F_1..F_J."""

    dim: int
    elements: np.ndarray

    @property
    def size(self) -> int:
        """Number of traceless elements J = d^2 - 1."""
        return self.dim * self.dim - 1

    @property
    def traceless(self) -> np.ndarray:
        return self.elements[1:]

    def gram(self) -> np.ndarray:
        return np.einsum("jab,kab->jk", self.elements.conj(), self.elements)

    def coordinates(self, operator: np.ndarray) -> np.ndarray:
        """Real coordinates Re Tr(F_j A) of a Hermitian operator, j = 1..J."""
        return np.einsum("jab,ba->j", self.traceless, operator).real

    def expand(self, coords: np.ndarray) -> np.ndarray:
        """Traceless operator sum_j coords_j F_j."""
        return np.tensordot(np.asarray(coords, dtype=float), self.traceless, axes=1)


def _gell_mann(d: int) -> List[np.ndarray]:
    elements = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k], anti[k, j] = -1j, 1j
            elements.append(sym / np.sqrt(2.0))
            elements.append(anti / np.sqrt(2.0))
    for level in range(1, d):
        diag = np.zeros(d, dtype=complex)
        diag[:level] = 1.0
        diag[level] = -level
        elements.append(np.diag(diag) / np.sqrt(level * (level + 1)))
    return elements


@cachetools.cached(cache=cachetools.LRUCache(maxsize=16))
def _cached_basis(d: int) -> OperatorBasis:
    elements = [np.eye(d, dtype=complex) / np.sqrt(d)] + _gell_mann(d)
    logger.debug(f"Built nice operator basis [dim={d}, size={len(elements)}]")
    return OperatorBasis(dim=d, elements=_frozen(np.stack(elements), dtype=complex))


def build_nice_basis(d: int) -> OperatorBasis:
    """Build the generalized Gell-Mann nice operator basis.

    For d = 2 the traceless elements are sigma_x/sqrt(2), sigma_y/sqrt(2), sigma_z/sqrt(2),
    in that order.

    Args:
        d: Hilbert-space dimension

    Returns:
        OperatorBasis with d^2 orthonormal Hermitian elements

    Raises:
        InvalidDimension: If d < 2
    """
    if int(d) != d or d < 2:
        raise InvalidDimension(message=f"Dimension must be an integer >= 2, got d={d}")
    return _cached_basis(int(d))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix: Hermitian, unit trace, positive semidefinite."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                message=f"Expected a {self.dim}x{self.dim} matrix, got shape={entries.shape}"
            )
        if not is_hermitian(entries, TRACE_TOL):
            raise NotHermitian(message="Density matrix is not Hermitian")
        trace = np.trace(entries)
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidState(message=f"Density matrix trace must be 1, got {trace.real:.3e}")
        min_eig = float(np.linalg.eigvalsh(entries).min())
        if min_eig < -POSITIVITY_SLACK:
            raise PositivityViolation(
                message=f"Density matrix has a negative eigenvalue [min_eig={min_eig:.3e}]"
            )
        object.__setattr__(self, "entries", _frozen(entries, dtype=complex))

    @classmethod
    def from_matrix(cls, entries: np.ndarray) -> "DensityMatrix":
        entries = np.asarray(entries, dtype=complex)
        return cls(dim=entries.shape[0], entries=entries)

    @classmethod
    def from_ket(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(dim=psi.shape[0], entries=np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(dim=d, entries=np.eye(d, dtype=complex) / d)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Coherence vector of a d-level state.

    `convention="bloch"` is only meaningful for qubits and stores sqrt(2) times the
    coherence coordinates, so that pure states lie on the unit sphere.
    """

    dim: int
    coords: np.ndarray
    convention: Convention = "coherence"

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1)
        if self.dim < 2:
            raise InvalidDimension(message=f"Dimension must be >= 2, got d={self.dim}")
        if coords.shape[0] != self.dim * self.dim - 1:
            raise DimensionMismatch(
                message=f"Expected {self.dim * self.dim - 1} coordinates for d={self.dim}, "
                f"got {coords.shape[0]}"
            )
        if self.convention not in ("coherence", "bloch"):
            raise InvalidState(message=f"Unknown convention={self.convention}")
        if self.convention == "bloch" and self.dim != 2:
            raise InvalidState(message="The bloch convention is only defined for qubits")
        object.__setattr__(self, "coords", _frozen(coords, dtype=float))

    @classmethod
    def bloch(cls, x: float, y: float, z: float) -> "StateVector":
        return cls(dim=2, coords=np.array([x, y, z], dtype=float), convention="bloch")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def to_convention(self, convention: Convention) -> "StateVector":
        """Return the same state expressed in `convention`."""
        if convention == self.convention:
            return self
        if self.dim != 2:
            raise InvalidState(message="The bloch convention is only defined for qubits")
        factor = BLOCH_SCALE if convention == "bloch" else 1.0 / BLOCH_SCALE
        return StateVector(dim=2, coords=self.coords * factor, convention=convention)

    def __repr__(self) -> str:
        coords = ", ".join(f"{c:.6g}" for c in self.coords)
        return f"StateVector(dim={self.dim}, convention={self.convention}, coords=({coords}))"


def _check_dims(dim: int, basis: OperatorBasis) -> None:
    if dim != basis.dim:
        raise DimensionMismatch(message=f"State dim={dim} does not match basis dim={basis.dim}")


def to_state_vector(rho: DensityMatrix, basis: Optional[OperatorBasis] = None) -> StateVector:
    """Coherence vector v_j = Tr(rho F_j) of a density matrix.

    Raises:
        DimensionMismatch: If rho and basis dimensions differ
    """
    basis = basis or build_nice_basis(rho.dim)
    _check_dims(rho.dim, basis)
    return StateVector(dim=rho.dim, coords=basis.coordinates(rho.entries))


def state_matrix(v: StateVector, basis: Optional[OperatorBasis] = None) -> np.ndarray:
    """I/d + sum_j v_j F_j without positivity validation."""
    basis = basis or build_nice_basis(v.dim)
    _check_dims(v.dim, basis)
    coords = v.to_convention("coherence").coords
    return np.eye(v.dim, dtype=complex) / v.dim + basis.expand(coords)


def from_state_vector(v: StateVector, basis: Optional[OperatorBasis] = None) -> DensityMatrix:
    """Density matrix rho = I/d + sum_j v_j F_j.

    Raises:
        DimensionMismatch: If v and basis dimensions differ
        PositivityViolation: If the coordinates lie outside the state space
    """
    return DensityMatrix(dim=v.dim, entries=state_matrix(v, basis))


def purity(v: StateVector) -> float:
    """Tr(rho^2) from the coherence vector."""
    norm_sq = float(np.dot(v.coords, v.coords))
    if v.convention == "bloch":
        return 0.5 * (1.0 + norm_sq)
    return 1.0 / v.dim + norm_sq


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues of a Hermitian matrix with degenerate groups merged."""

    eigenvalues: np.ndarray
    projectors: np.ndarray
    eigenvectors: tuple
    group_tol: float

    @property
    def ranks(self) -> List[int]:
        return [vecs.shape[1] for vecs in self.eigenvectors]

    def reconstruct(self) -> np.ndarray:
        return np.einsum("i,iab->ab", self.eigenvalues, self.projectors)


def eigendecompose_grouped(a: np.ndarray, group_tol: float = GROUP_TOL) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues closer than group_tol * spectral range merged.

    Args:
        a: Hermitian matrix
        group_tol: Relative grouping tolerance

    Returns:
        SpectralDecomposition with one projector per eigenvalue group

    Raises:
        NotHermitian: If `a` is not Hermitian to 1e-10
    """
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise NotHermitian(message="eigendecompose_grouped requires a Hermitian matrix")
    values, vectors = np.linalg.eigh(0.5 * (a + a.conj().T))
    threshold = group_tol * float(values[-1] - values[0])

    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][-1]] <= threshold:
            groups[-1].append(i)
        else:
            groups.append([i])

    eigenvalues = np.array([values[g].mean() for g in groups])
    blocks = tuple(_frozen(vectors[:, g]) for g in groups)
    projectors = np.stack([b @ b.conj().T for b in blocks])
    return SpectralDecomposition(
        eigenvalues=_frozen(eigenvalues),
        projectors=_frozen(projectors),
        eigenvectors=blocks,
        group_tol=group_tol,
    )


def sample_states(
    dim: int,
    n: int,
    rng: np.random.Generator,
    convention: Optional[Convention] = None,
    radius: float = 1.0,
) -> List[StateVector]:
    """Draw random valid states.

    Qubits are sampled uniformly from the Bloch ball of the given radius; larger
    dimensions use Ginibre-induced mixed states.
    """
    if dim == 2:
        directions = rng.normal(size=(n, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius * rng.uniform(size=n) ** (1.0 / 3.0)
        states = [StateVector(dim=2, coords=r * u, convention="bloch") for r, u in zip(radii, directions)]
        return [s.to_convention(convention or "bloch") for s in states]

    basis = build_nice_basis(dim)
    out = []
    for _ in range(n):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = g @ g.conj().T
        out.append(StateVector(dim=dim, coords=basis.coordinates(rho / np.trace(rho).real)))
    return out
