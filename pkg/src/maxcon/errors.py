"""Exception types shared across the package."""


class MaxconError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MaxconError, ValueError):
    """Raised for malformed inputs: wrong shapes, negative thresholds, etc."""


class DegenerateDataError(MaxconError):
    """Raised when the data cannot determine a model (zero spread, all samples degenerate)."""


class SolverError(MaxconError):
    """Raised when a convex subproblem fails to reach an optimal solution."""


class LimitExceededError(MaxconError):
    """Raised when an exhaustive search would exceed its configured budget."""


class ParseError(MaxconError):
    """Raised for unreadable input files; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
