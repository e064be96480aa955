"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, data errors 3,
numerical errors 4.
"""


class SeariseError(Exception):
    """Base class for all package errors."""


class UsageError(SeariseError):
    """Invalid configuration or arguments."""


class DataError(SeariseError):
    """Input data violates a documented contract."""


class ParseError(DataError):
    """A file could not be parsed; message names the offending line."""


class StructuralError(DataError):
    """Parsed data violates a structural invariant (duplicates, gaps)."""


class NumericalError(SeariseError):
    """A numerical routine failed."""


class ConvergenceError(NumericalError):
    """Alternating demeaning did not converge within the sweep budget."""

    def __init__(self, message: str, last_change: float):
        super().__init__(message)
        self.last_change = last_change


class RankDeficiencyError(NumericalError):
    """Design matrix is rank deficient; message names the dependent column."""

    def __init__(self, message: str, column: str):
        super().__init__(message)
        self.column = column


class ClusterError(NumericalError):
    """Cluster-robust variance is undefined for the given clustering."""
