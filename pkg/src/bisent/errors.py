"""Exception types shared across the toolkit.

The CLI maps these to exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3. Plain ValueError is reserved for programming-contract
violations (wrong shapes, empty sequences passed to kernels).
"""


class BisentError(Exception):
    """Base class for toolkit errors."""


class ConfigError(BisentError):
    """Bad configuration: unknown keys, missing resources, invalid flag combos."""


class DataError(BisentError):
    """Malformed input data or on-disk file formats."""


class NumericError(BisentError):
    """Numerical failure, e.g. a non-finite loss during training."""
