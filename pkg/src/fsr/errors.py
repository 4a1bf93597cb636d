class ConfigurationError(ValueError):
    """Inconsistent shapes, unknown options or invalid hyper-parameters."""


class NumericalAbort(RuntimeError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record or {}
