"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands live on different grids (n_modes or side disagree)."""


class UnsupportedNonlinearityError(ValueError):
    """Nonlinearity outside the coercive cubic class handled here."""


class StepFailureError(RuntimeError):
    """A time step could not be completed.

    Carries the iteration history of the failed solve (may be empty for
    non-iterative schemes) so callers can report diagnostics.
    """

    def __init__(self, message, residual_history=None, time=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.time = time


class InstabilityError(StepFailureError):
    """Energy safeguard tripped: the step increased the energy beyond
    the configured tolerance.  Usually means dt is too large for the
    current resolution/nonlinearity."""


class FileFormatError(RuntimeError):
    """A snapshot or checkpoint file is malformed or truncated."""


class CheckpointVersionError(FileFormatError):
    """Checkpoint written by an incompatible format version."""


class CheckpointMismatchError(ValueError):
    """Checkpoint does not match the grid/nonlinearity it is resumed with."""


class InsufficientDataError(ValueError):
    """A log does not contain enough samples for the requested estimate."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""

    def __init__(self, message, key=None):
        if key is not None:
            message = f"config key '{key}': {message}"
        super().__init__(message)
        self.key = key
