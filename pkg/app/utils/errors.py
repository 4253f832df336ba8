from typing import Optional


class ElmStreamError(Exception):
    """Base class for all errors raised by the library.

    Each subclass carries the exit code the command line returns for it.
    """

    exit_code: int = 1


class InvalidArgumentError(ElmStreamError, ValueError):
    """A parameter or precondition was violated."""

    exit_code = 1


class ShapeError(InvalidArgumentError):
    """Array dimensions do not agree."""

    exit_code = 5


class UnstableStepError(InvalidArgumentError):
    """The step matrix falls in the violating stability class."""

    exit_code = 3


class IllConditionedError(ElmStreamError, ArithmeticError):
    def __init__(self, message: str, condition: Optional[float] = None) -> None:
        """
        Raised when the normal matrix cannot be factorised reliably.

        Args:
            message: Human readable description.
            condition: The condition number estimate, if one was computed.
        """
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class DataFormatError(ElmStreamError, ValueError):
    exit_code = 4

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OutputPathError(ElmStreamError, OSError):
    exit_code = 2
