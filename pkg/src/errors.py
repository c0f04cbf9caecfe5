"""
Exception types shared across the toolkit.

Everything raised on purpose derives from EventBlurError so callers (the CLI
in particular) can tell a bad input apart from a bug.
"""

from typing import Optional


class EventBlurError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(EventBlurError, ValueError):
    """A precondition on an argument or a value type was violated."""


class SingularFitError(EventBlurError, ArithmeticError):
    """A least-squares design matrix has no unique solution."""


class InvalidStartError(EventBlurError, ValueError):
    """An optimizer was started at a point with non-finite residuals."""


class ConfigError(EventBlurError, ValueError):
    """A configuration file is missing keys or contains unknown ones."""


class EventFileParseError(EventBlurError, ValueError):
    """An event file could not be decoded."""

    def __init__(self, message: str, path: str = "",
                 line: Optional[int] = None, offset: Optional[int] = None):
        self.path = path
        self.line = line
        self.offset = offset

        where = path
        if line is not None:
            where = f"{path}:{line}"
        elif offset is not None:
            where = f"{path}@{offset}"

        super().__init__(f"{where}: {message}" if where else message)
