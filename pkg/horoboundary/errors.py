"""Exception hierarchy for the horoboundary package.

Every error raised on purpose by the library derives from
:class:`HoroboundaryError` and carries the process exit code the CLI reports
for it.  Input problems also derive from :class:`ValueError` so callers that
only care about "bad input" can catch that.
"""

from __future__ import annotations


class HoroboundaryError(Exception):
    """Base class for all library errors."""

    exit_code: int = 1


class InputFormatError(HoroboundaryError, ValueError):
    """Malformed source file, config file, word, or serialized artifact."""

    exit_code = 2


class InputRejectedError(InputFormatError):
    """A transducer input word is not a valid path in the type graph."""


class AlphabetMismatchError(InputFormatError):
    """Two transducers cannot be composed because their type graphs differ."""


class CodeMismatchError(InputFormatError):
    """A chain crosses a type that the prefix code does not cover."""


class NonBranchingError(InputFormatError):
    """The type graph has isolated branches and must be expanded first."""


class MustExpandError(NonBranchingError):
    """Simplification would delete an isolated branch; expand first."""


class UnsupportedSourceError(InputFormatError):
    """The requested operation needs a group action the source does not declare."""


class InsufficientRadiusError(HoroboundaryError):
    """A computation needs vertices or certified distances beyond the ball."""

    exit_code = 3


class SynthesisDivergedError(HoroboundaryError):
    """Transducer synthesis did not close up within the state bound.

    Attributes:
        unresolved: Signatures that were reached but never expanded.
    """

    exit_code = 4

    def __init__(self, message: str, unresolved: list[object] | None = None) -> None:
        super().__init__(message)
        self.unresolved: list[object] = list(unresolved or [])


class AuditError(HoroboundaryError):
    """An invariant check failed."""

    exit_code = 5


class ClassificationIncompleteError(AuditError):
    """Typing could not assign a type or a morphism witness where one is needed."""
