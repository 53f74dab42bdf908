"""Exception types shared across the package."""


class ModelFormatError(ValueError):
    """A weights or image file failed to parse or validate."""


class BudgetExhaustedError(RuntimeError):
    """A classifier query was attempted past the counter's budget."""


class SingularSystemError(ValueError):
    """An interpolation system is singular or infeasible."""


class BoxTooThinError(ValueError):
    """No distinct sample points fit inside the given box."""


class ConfigError(ValueError):
    """Invalid attack or experiment configuration."""
