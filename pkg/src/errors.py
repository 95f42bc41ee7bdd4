"""
Exception hierarchy shared by every package.

Miss, reject and early-exit outcomes are values, not exceptions; the classes
below are raised only for malformed input or exhausted budgets.
"""

from typing import Any, Optional


class BinPickError(Exception):
    """Base class for all errors raised by this project."""


class InvalidInput(BinPickError, ValueError):
    """An argument violates a documented precondition."""


class EmptyInput(InvalidInput):
    """An operation that needs at least one element received none."""


class ParseError(BinPickError):
    """A mesh or database file could not be parsed."""

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        location = []
        if path is not None:
            location.append(str(path))
        if offset is not None:
            location.append(f"byte {offset}")
        prefix = f"{': '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class EmptyMesh(BinPickError):
    """A mesh has no usable triangles."""


class InvalidDepth(InvalidInput):
    """A depth value that must be positive is not."""


class DegeneratePair(InvalidInput):
    """Two grasp contacts coincide, so no closing axis exists."""


class BudgetExhausted(BinPickError):
    """A sampling budget ran out before the target count was reached."""

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)


class VersionMismatch(BinPickError):
    """A serialized artifact carries an unsupported format version."""


class ConfigError(BinPickError):
    """The run configuration is malformed or out of range."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class NoReachableViewpoint(BinPickError):
    """No sampled camera pose passes the reachability proxy."""


class FillFailure(BinPickError):
    """The bin generator could not place the requested number of objects."""

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)
