"""Exception types shared across the toolkit."""

__all__ = ["UwbSimError", "NoPulseError", "ConfigError", "NotConvergedError"]


class UwbSimError(Exception):
    """Base class for toolkit errors."""


class NoPulseError(UwbSimError):
    """No sample above the detection threshold."""


class ConfigError(UwbSimError):
    """Invalid or inconsistent configuration."""


class NotConvergedError(UwbSimError):
    """An iterative solver failed to converge."""
