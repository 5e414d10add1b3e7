class StableClusterError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(StableClusterError, ValueError):
    pass


class InfeasibleError(StableClusterError):
    """Requested clustering cannot exist, e.g. more clusters than points."""


class BudgetError(StableClusterError):
    """An enumeration or construction guard was exceeded."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class UnsupportedEngineError(StableClusterError):
    pass
