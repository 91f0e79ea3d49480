"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (config 2, data 3, numeric 4),
so library code should raise the most specific class that applies.
"""


class SclMetricError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SclMetricError):
    """Invalid configuration value or malformed config file."""


class DataError(SclMetricError):
    """Problems with datasets, mining preconditions, or stored artifacts."""


class ParseError(DataError):
    """Malformed embedding CSV; the message names the offending line."""


class ProtocolError(DataError):
    """Split or evaluation-protocol precondition violated."""


class MiningError(DataError):
    """Set/pair/triplet mining cannot proceed on this dataset."""


class DimensionMismatchError(DataError):
    """Vectors or parameter shapes that must agree do not."""


class CheckpointError(DataError):
    """Unreadable, corrupt, or version-incompatible checkpoint file."""


class NumericError(SclMetricError):
    """Non-finite values encountered during training."""
