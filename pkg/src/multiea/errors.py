"""Error types shared across the package.

The CLI maps these onto distinct exit codes, so raising the right class
matters more than the message text.
"""


class MultieaError(Exception):
    """Base class for all package errors."""


class ConfigError(MultieaError):
    """Invalid hyperparameter or command-line configuration (exit code 2)."""


class DataError(MultieaError):
    """Malformed or inconsistent input data (exit code 3)."""


class DivergenceError(MultieaError):
    """Training produced NaN/Inf loss (exit code 4)."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss diverged at epoch {epoch}")
