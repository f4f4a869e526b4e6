"""Exception types shared across the package."""


class JointHashError(Exception):
    """Base class for all package errors."""


class DimensionError(JointHashError, ValueError):
    """Operand shapes are mutually inconsistent."""


class NumericError(JointHashError, ArithmeticError):
    """A computation produced or received non-finite values."""


class TrainingDivergedError(NumericError):
    """The training loss left the finite range."""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"loss diverged at epoch {epoch}, batch {batch}: J={loss!r}")


class FormatError(JointHashError, ValueError):
    """A binary or text file does not match its declared format."""


class DataError(JointHashError, ValueError):
    """File contents are well-formed but semantically invalid."""


class ConfigError(JointHashError, ValueError):
    """A run configuration is missing keys or contains unknown ones."""
