"""Shared exception types."""


class EcgNodeError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(EcgNodeError):
    """A file or payload does not conform to its documented schema."""


class ConfigError(EcgNodeError):
    """Invalid or inconsistent configuration values."""
