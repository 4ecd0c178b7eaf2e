"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so raising the right class
matters: configuration errors are caller mistakes (bad options, impossible
settings), data errors are malformed or inconsistent inputs, structural
errors are violated container invariants, and convergence errors carry the
last iterate of a solver that ran out of iterations.
"""


class SharedLassoError(Exception):
    """Base class for all package errors."""


class StructuralError(SharedLassoError):
    """A container invariant was violated (bad indices, length mismatch)."""


class ConfigurationError(SharedLassoError):
    """Options or parameters are invalid or mutually inconsistent."""


class DataError(SharedLassoError):
    """Input data is malformed or inconsistent with the model."""


class ConvergenceError(SharedLassoError):
    """Solver failed to converge; carries the last iterate for diagnosis."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit
