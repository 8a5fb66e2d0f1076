"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""


class StformerError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StformerError):
    """Invalid or inconsistent configuration."""


class MissingGraphError(ConfigError):
    """A model variant that needs an adjacency matrix was built without one."""


class IncompatibleCheckpointError(ConfigError):
    """Checkpoint header does not match the expected configuration."""


class DataError(StformerError):
    """Input data violates a documented contract (non-finite, mismatched, ...)."""


class FormatError(DataError):
    """A file could not be parsed under its documented format."""


class InsufficientDataError(DataError):
    """Not enough timesteps for the requested windowing or split."""


class NumericError(StformerError):
    """A computation produced non-finite values; the message names the site."""


class DegenerateRowError(StformerError):
    """A softmax row had every entry masked out."""


class DegenerateScaleError(StformerError):
    """Min-max scaling was asked to rescale a constant matrix."""
