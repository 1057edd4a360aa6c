"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary bad-argument cases; the classes
here mark conditions the CLI maps to distinct exit codes.
"""


class ParseError(ValueError):
    """Malformed input file. ``offset`` is the byte position when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CapacityError(RuntimeError):
    """A guarded state-space or variable-count limit was exceeded."""


class StructureError(ValueError):
    """Problem graph does not have the shape a solver requires."""


class SolverError(RuntimeError):
    """A solver backend failed to produce a result."""


class UndefinedStatisticError(ValueError):
    """A requested statistic is undefined for the given input."""
