"""Error taxonomy, one class per CLI exit code."""


class RossError(Exception):
    """Base class; `exit_code` is what the CLI returns when this escapes."""

    exit_code = 1


class ConfigError(RossError):
    exit_code = 1


class DataLoadError(RossError):
    exit_code = 2


class NumericFailure(RossError):
    """First NaN/Inf anywhere aborts the run (no silent continuation)."""

    exit_code = 3


class InvariantFailure(RossError):
    exit_code = 4
