"""Exception hierarchy shared by all modules.

The command line maps :class:`UsageError` to exit code 1 and every other
:class:`PhaseMotionError` to exit code 2.
"""


class PhaseMotionError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(PhaseMotionError):
    """Invalid arguments or configuration supplied by the caller."""


class SizeError(PhaseMotionError):
    """Frame dimensions too small for the requested pyramid."""


class DataError(PhaseMotionError):
    """Non-finite or otherwise invalid sample values."""


class StructureError(PhaseMotionError):
    """Mismatched shapes, specs or band layouts."""


class FormatError(PhaseMotionError):
    """Malformed file or unsupported channel layout."""


class DivergenceError(PhaseMotionError):
    """Optimization produced a non-finite loss."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
