"""Exception types raised by the simulator."""

from pathlib import Path
from typing import Optional, Sequence, Union


class SimulatorError(Exception):
    """Base class for all simulator errors."""


class InvalidArgumentError(SimulatorError, ValueError):
    """An argument is outside the accepted domain."""


class ShapeError(SimulatorError, ValueError):
    """Two arrays that must line up do not."""

    def __init__(self, what: str, expected: Union[int, Sequence[int]], actual: Union[int, Sequence[int]]):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class ConfigError(SimulatorError, ValueError):
    """Configuration is missing, malformed, or out of range."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        prefix = f"'{key}': " if key else ""
        super().__init__(f"{prefix}{message}")


class IdxParseError(SimulatorError, ValueError):
    """An IDX file could not be parsed."""

    def __init__(self, message: str, path: Union[str, Path], offset: int):
        self.path = Path(path)
        self.offset = offset
        super().__init__(f"{self.path} @ offset {offset}: {message}")


class IdxMagicError(IdxParseError):
    """Magic number does not match the expected IDX container type."""


class IdxTruncatedError(IdxParseError):
    """File ends before the declared payload."""


class IdxCountMismatchError(IdxParseError):
    """Image and label files declare different item counts."""


class OutputError(SimulatorError, OSError):
    """Writing a result file failed."""

    def __init__(self, path: Union[str, Path], cause: BaseException):
        self.path = Path(path)
        super().__init__(f"Failed to write {self.path}: {cause}")
