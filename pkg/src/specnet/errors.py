"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: usage errors exit 1, data
errors exit 2, numerical errors exit 3.
"""


class SpecnetError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SpecnetError):
    """Bad command line: unknown command, missing or malformed flag."""


class DataError(SpecnetError):
    """Unreadable or inconsistent input data (files, manifests, checkpoints)."""


class NumericalError(SpecnetError):
    """Numerical failure: non-convergence, NaN/Inf produced, divergence."""


class ContractViolation(ValueError, SpecnetError):
    """Caller broke a documented precondition (shapes, symmetry, norms)."""
