"""Exception hierarchy shared across the pipeline.

The CLI maps these onto stable exit codes: ConfigError -> 2,
DataFormatError -> 3, NumericalError -> 4.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid configuration, arguments, or dimension mismatches."""


class DataFormatError(PipelineError):
    """Malformed or inconsistent on-disk artifacts."""


class NumericalError(PipelineError):
    """Numerical failure (singular systems, failed factorizations)."""
