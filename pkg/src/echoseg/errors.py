"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration or incompatible parameter combination."""


class VideoFormatError(ValueError):
    """Malformed or corrupt raw volume file."""


class NumericError(RuntimeError):
    """Non-finite values encountered where finite math was expected."""
