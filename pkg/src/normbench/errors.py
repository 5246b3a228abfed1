"""Exception hierarchy shared by the package."""


class NormbenchError(ValueError):
    """Base class for all errors raised by normbench."""


class SchemaError(NormbenchError):
    pass


class EmptyDataError(NormbenchError):
    pass


class SplitError(NormbenchError):
    pass


class InsufficientDataError(NormbenchError):
    pass


class DegenerateColumnError(NormbenchError):
    """A column cannot be scaled (zero spread, zero median, ...)."""


class DomainError(NormbenchError):
    pass


class ShapeError(NormbenchError):
    pass


class DivergenceError(NormbenchError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
