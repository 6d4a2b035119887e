"""
pcortest errors - exception hierarchy shared by the library and the CLI
"""
from typing import Optional


class PcorTestError(Exception):
    """Base class for all pcortest errors"""


class DomainError(PcorTestError, ValueError):
    """Argument outside its documented domain"""


class PermutationSizeError(DomainError):
    """Exact enumeration requested for too many observations"""


class InputFormatError(PcorTestError, ValueError):
    """Malformed input file"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class DegenerateDataError(PcorTestError, ValueError):
    """A vector has no variation (zero sum of squares or constant design)"""


class NumericalFailureError(PcorTestError, ArithmeticError):
    """A matrix factorisation failed even after jitter"""


class InterpolationInfeasibleError(NumericalFailureError):
    """lambda = 0 with a rank-deficient kernel matrix"""


class ScenarioFailureError(PcorTestError, RuntimeError):
    """Too many replications of a scenario failed"""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ReportIOError(PcorTestError, OSError):
    """Report or dataset file could not be written or read"""

    def __init__(self, message: str, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
