"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, anything
derived from :class:`ValidationError` exits 2.
"""


class RedunGroupError(Exception):
    """Base class for all package errors."""


class ValidationError(RedunGroupError):
    """Invalid input data or configuration."""


class ParseError(ValidationError):
    """File could not be parsed; carries row/column context when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class TrainingDivergedError(RedunGroupError):
    """Training produced a non-finite loss; carries the epoch index."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss
