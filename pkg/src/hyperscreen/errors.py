"""Exception hierarchy. Every error carries the process exit code the CLI reports."""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class HyperscreenError(Exception):
    """Base class for all hyperscreen failures."""

    exit_code = EXIT_CONFIG


class ConfigError(HyperscreenError, ValueError):
    """Invalid configuration: unknown key, schema violation, bad preset."""

    exit_code = EXIT_CONFIG


class DataError(HyperscreenError):
    """Unreadable or inconsistent input data."""

    exit_code = EXIT_DATA


class FormatError(DataError):
    """Binary container with a bad magic, version or checksum."""


class NumericError(HyperscreenError):
    """A computation produced a non-finite or undefined value.

    ``term`` names the loss term, parameter or quantity that failed.
    """

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, term: str | None = None) -> None:
        super().__init__(message)
        self.term = term


class GeometryError(NumericError, ValueError):
    """Input outside the domain of a Lorentz-model operation."""


class RangeError(NumericError):
    """Tangent vector too long to exponentiate safely."""


class MetricError(NumericError, ValueError):
    """Metric undefined for the given ranking (single class, zero variance)."""
