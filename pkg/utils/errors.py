"""Exception types raised across the toolkit.

All of them derive from ValueError. The command line maps any
ToolkitError that escapes a command to exit code 2; other exceptions
propagate.
"""


class ToolkitError(ValueError):
    """Base class for toolkit errors."""


class DimensionError(ToolkitError):
    """Array shapes disagree or violate a divisibility constraint."""


class ParameterError(ToolkitError):
    """A scalar parameter is outside its valid range."""


class DomainError(ToolkitError):
    """Input values are outside the physical domain (e.g. negative depth)."""


class UndefinedMetricError(ToolkitError):
    """A metric cannot be computed for the given inputs."""


class ConfigurationError(ToolkitError):
    """Run or training configuration is invalid."""


class ImageLoadError(ToolkitError):
    """A file could not be read or decoded."""


class PairingError(ToolkitError):
    """Files paired by stem disagree in dimensions."""
