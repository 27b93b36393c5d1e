"""Exception hierarchy and process exit codes."""
from typing import Optional

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_BUDGET = 3


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""

    exit_code = EXIT_INPUT_ERROR


class SpecError(WorkbenchError):
    """Malformed input: bad spec file, unknown names, unknown keys."""


class ShapeError(SpecError):
    """Morphisms or predicates do not form the diagram an operation needs."""


class NotAPullbackError(ShapeError):
    """A square handed to a Beck-Chevalley check is not a pullback."""


class SortError(SpecError):
    """A formula is not well-sorted in its context."""


class FormulaSyntaxError(SpecError):
    """Formula text could not be parsed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class BudgetExceeded(WorkbenchError):
    """A construction or enumeration would exceed the configured size bound."""

    exit_code = EXIT_BUDGET


class StructureError(WorkbenchError):
    """A Nelson structure or ultrapower precondition does not hold."""

    exit_code = EXIT_CHECK_FAILED

    def __init__(self, message: str, witness: Optional[str] = None):
        super().__init__(message if witness is None else f"{message}: {witness}")
        self.witness = witness
