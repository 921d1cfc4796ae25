"""Exception hierarchy shared across the package.

Each class maps to a CLI exit code (see cli.main).
"""


class HerdalError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(HerdalError):
    """Invalid configuration values (non-positive dims, bad method names, ...)."""

    exit_code = 2


class BudgetError(HerdalError):
    """A requested budget exceeds the available candidates."""

    exit_code = 3


class FormatError(HerdalError):
    """Malformed input file (bad header, wrong row width, duplicate pixels)."""

    exit_code = 4


class InsufficientSamplesError(HerdalError):
    """Replay provider asked for more samples than were stored."""

    exit_code = 4


class DegenerateBandwidthError(HerdalError):
    """Median-heuristic subsample collapsed to a single point; caller must
    fall back to a fixed bandwidth."""

    exit_code = 2
