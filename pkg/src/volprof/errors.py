"""Exception types mapped to CLI exit codes."""


class VolprofError(Exception):
    """Base class for all volprof errors."""


class ConfigError(VolprofError):
    """Invalid configuration, flags, or parameter values (exit code 1)."""


class DataError(VolprofError):
    """Input data violates a contract the pipeline relies on (exit code 2)."""


class LogFormatError(DataError):
    """The log file is structurally unusable (bad header, mostly-rejected rows)."""


class InvariantError(VolprofError):
    """An internal consistency check failed; indicates a bug (exit code 3)."""
