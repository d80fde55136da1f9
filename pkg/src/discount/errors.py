"""Exception hierarchy shared across the package."""


class DiscountError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(DiscountError, ValueError):
    pass


class TrainingDivergedError(DiscountError):
    pass


class ExternalModelError(DiscountError):
    """The external model process failed, timed out or answered garbage."""

    def __init__(self, message, batch_index=None):
        if batch_index is not None:
            message = f"{message} (batch {batch_index})"
        super().__init__(message)
        self.batch_index = batch_index


class InvalidDatasetError(DiscountError, ValueError):
    pass


class UndefinedScoreError(DiscountError, ZeroDivisionError):
    pass


class CSVParseError(DiscountError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(DiscountError, ValueError):
    pass


class AbortedRunError(DiscountError):
    """Optimisation stopped early; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
