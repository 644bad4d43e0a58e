"""QPP toolkit exceptions."""

from dataclasses import dataclass
from typing import Optional


@dataclass
class QPPError(Exception):
    """Base exception for all QPP errors."""

    message: str

    def __post_init__(self):
        super().__init__(self.message)


@dataclass
class NumericalError(QPPError):
    """Base exception for numerical and model errors."""

    message: str
    error_type: Optional[str] = None
    suggestion: Optional[str] = None

    def __str__(self) -> str:
        """Return string representation of error."""
        parts = []
        if self.error_type:
            parts.append(f"type={self.error_type}")

        formatted = f"[{', '.join(parts)}] {self.message}" if parts else self.message
        if self.suggestion:
            formatted += f" (Suggestion: {self.suggestion})"
        return formatted


@dataclass
class InvalidDimension(NumericalError):
    """Exception raised for a Hilbert-space dimension below 2."""

    message: str = "Invalid dimension"
    error_type: str = "invalid_dimension"
    suggestion: str = "Use a dimension d >= 2"


@dataclass
class DimensionMismatch(NumericalError):
    """Exception raised when operands live in different spaces."""

    message: str = "Dimension mismatch"
    error_type: str = "dimension_mismatch"
    suggestion: str = "Check that state, basis and dissipator share the same dimension"


@dataclass
class InvalidState(NumericalError):
    """Exception raised for a malformed density matrix or coherence vector."""

    message: str = "Invalid state"
    error_type: str = "invalid_state"
    suggestion: str = "States must be Hermitian with unit trace"


@dataclass
class PositivityViolation(NumericalError):
    """Exception raised when coordinates fall outside the set of valid states."""

    message: str = "State is not positive semidefinite"
    error_type: str = "positivity_violation"
    suggestion: str = "Keep the Bloch vector inside the unit ball"


@dataclass
class NotHermitian(NumericalError):
    """Exception raised when a matrix expected to be Hermitian is not."""

    message: str = "Matrix is not Hermitian"
    error_type: str = "not_hermitian"
    suggestion: str = "Symmetrize the input as (A + A^dagger) / 2"


@dataclass
class InvalidLindbladOperator(NumericalError):
    """Exception raised for a Lindblad term with a traceful operator or negative rate."""

    message: str = "Invalid Lindblad operator"
    error_type: str = "invalid_lindblad_operator"
    suggestion: str = "Move the trace part into the Hamiltonian and use rates >= 0"


@dataclass
class InvalidReference(NumericalError):
    """Exception raised for a reference vector outside the admissible range."""

    message: str = "Invalid reference state"
    error_type: str = "invalid_reference"
    suggestion: str = "Reference Bloch vectors must satisfy ||w|| <= 1"


@dataclass
class GradientUndefined(NumericalError):
    """Exception raised when a property gradient is evaluated outside its domain."""

    message: str = "Gradient undefined at this state"
    error_type: str = "gradient_undefined"
    suggestion: str = "Move the state away from the property's singular set"


@dataclass
class BreakdownPoint(NumericalError):
    """Exception raised when no finite property-preserving control exists."""

    message: str = "State is a breakdown point"
    error_type: str = "breakdown_point"
    suggestion: str = "The target property cannot be preserved from this state"


@dataclass
class NotAStablePoint(NumericalError):
    """Exception raised when a stabilizing control is requested at an unstable state."""

    message: str = "State is not a stable point"
    error_type: str = "not_a_stable_point"
    suggestion: str = "Check is_stable_point before requesting a stabilizing control"


@dataclass
class InvalidTrajectory(NumericalError):
    """Exception raised for a malformed parametrized trajectory."""

    message: str = "Invalid trajectory"
    error_type: str = "invalid_trajectory"
    suggestion: str = "Use strictly increasing parameter samples in [0, 1]"


@dataclass
class NotRealizable(NumericalError):
    """Exception raised when a trajectory cannot be produced by any finite control."""

    message: str = "Trajectory is not realizable"
    error_type: str = "not_realizable"
    suggestion: str = "Run check_realizability to locate the first violation"


@dataclass
class OutsideDomain(NumericalError):
    """Exception raised when a closed form is evaluated outside its validity range."""

    message: str = "Evaluation outside the formula's domain"
    error_type: str = "outside_domain"
    suggestion: str = "Evaluate closed forms strictly before the breakdown time"


@dataclass
class NumericalFailure(NumericalError):
    """Exception raised when a numerical routine cannot produce a result."""

    message: str = "Numerical failure"
    error_type: str = "numerical_failure"
    suggestion: str = "Check the conditioning of the inputs"


@dataclass
class UnsupportedScenario(NumericalError):
    """Exception raised for channel/property pairs without an analytic treatment."""

    message: str = "No analytic treatment for this scenario"
    error_type: str = "unsupported_scenario"
    suggestion: str = "Use simulate_tracked to obtain the breakdown time numerically"


@dataclass
class ConfigurationError(QPPError):
    """Exception raised for an invalid scenario configuration."""

    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        """Return string representation of error."""
        if self.line is not None:
            return f"line {self.line}: {self.message}"
        return self.message
