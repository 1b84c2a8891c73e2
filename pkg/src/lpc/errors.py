"""Exception types raised across the package."""


class LpcError(Exception):
    """Base class for all package errors."""


class NonInvertible(LpcError):
    """R_d + H stayed numerically singular after every regularization retry."""


class NonFinite(LpcError):
    """An iterate, loss value or closed-loop state became non-finite or diverged."""


class UnknownPreset(LpcError, KeyError):
    pass


class DimensionMismatch(LpcError, ValueError):
    pass


class PoolEmpty(LpcError):
    pass


class MissingSuccessorWeights(LpcError):
    pass


class ConfigError(LpcError, ValueError):
    """Bad or missing experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
