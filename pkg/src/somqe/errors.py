"""Exception hierarchy. The CLI maps these onto distinct exit codes."""


class SomQeError(Exception):
    """Base class for all somqe errors."""


class ConfigError(SomQeError):
    """Invalid configuration value or parameter combination."""


class InputError(SomQeError):
    """Malformed or mismatched runtime data (dimensions, alignment, ranges)."""


class FormatError(SomQeError):
    """Unreadable or unsupported image file."""
