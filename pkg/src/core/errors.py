from typing import List, Optional


class TrimShiftError(Exception):
    """Base class for every error raised by the trimshift library."""
    pass


class InvalidMatrixError(TrimShiftError):
    """Exception raised when a transition matrix is not square or not 0/1."""
    pass


class NonMixingMatrixError(TrimShiftError):
    """Exception raised when a transition matrix is reducible or periodic."""

    def __init__(self, message: str, irreducible: bool, period: int):
        super().__init__(message)
        self.irreducible = irreducible
        self.period = period


class InvalidSymbolError(TrimShiftError):
    """Exception raised when a symbol lies outside the alphabet."""
    pass


class InadmissibleWordError(TrimShiftError):
    """Exception raised when a word contains a forbidden transition."""
    pass


class InsufficientPrefixError(TrimShiftError):
    """Exception raised when a finite prefix does not determine the requested quantity."""
    pass


class InvalidMeasureError(TrimShiftError):
    """Exception raised when a stochastic matrix or stationary vector is inconsistent."""
    pass


class ConvergenceError(TrimShiftError):
    """Exception raised when an iterative solver exhausts its iteration budget."""
    pass


class ResourceError(TrimShiftError):
    """Exception raised when a request exceeds the supported depth or dimension."""
    pass


class CapExceededError(TrimShiftError):
    """Exception raised when an observable needs more lookahead than its cap allows."""

    def __init__(self, message: str, position: Optional[int] = None, path: Optional[int] = None):
        super().__init__(message)
        self.position = position
        self.path = path

    def __str__(self):
        base = super().__str__()
        if self.path is None and self.position is None:
            return base
        return f"{base} (path={self.path}, position={self.position})"


class DomainError(TrimShiftError, ValueError):
    """Exception raised when an argument lies outside the domain of an operation."""
    pass


class NonIntegrableError(DomainError):
    """Exception raised when an infinite truncation level is requested."""
    pass


class ScheduleInfeasibleError(TrimShiftError):
    """Exception raised when a trimming or threshold schedule is infeasible at some n."""

    def __init__(self, message: str, n: int):
        super().__init__(f"{message} (n={n})")
        self.n = n


class ConjugateDivergedError(TrimShiftError):
    """Exception raised when the de Bruijn fixed-point iteration fails to converge."""
    pass


class GapViolationError(TrimShiftError):
    """Exception raised when the second eigenvalue of a transfer matrix reaches the unit circle."""
    pass


class UnsupportedObservableError(TrimShiftError):
    """Exception raised when an observable has no finite-depth cylinder representation."""
    pass


class ConfigError(TrimShiftError):
    """Exception raised when a config file has one or more invalid keys."""

    def __init__(self, problems: List[str], keys: List[str]):
        super().__init__("Invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems
        self.keys = keys
