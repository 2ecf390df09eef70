"""Shared exception types."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, range, order)."""


class ConfigError(ValueError):
    """A configuration value or file is invalid."""


class TrainingDiverged(RuntimeError):
    """A non-finite loss or gradient was detected; carries a diagnostic dump."""

    def __init__(self, message: str, dump: dict | None = None):
        super().__init__(message)
        self.dump = dump or {}
