"""Exception hierarchy shared by all gstvqa modules.

Every error raised by the library derives from :class:`GstVqaError`, so
callers (and the CLI) can map failures to exit codes without catching
bare ``Exception``.
"""


class GstVqaError(Exception):
    """Base class for all gstvqa errors."""


class IoError(GstVqaError):
    """Missing, unreadable, or truncated input file."""


class FormatError(GstVqaError):
    """Malformed header, dimension mismatch, or unsupported pixel format."""


class DimensionError(GstVqaError):
    """Frame or volume dimensions unsuitable for the requested operation."""


class ArgumentError(GstVqaError):
    """Invalid argument value (bad rates, non-finite inputs, out-of-range parameters)."""


class DegenerateError(GstVqaError):
    """Degenerate statistics, e.g. a zero-variance patch."""


class ShapeError(GstVqaError):
    """Mismatched array shapes between operands."""


class DataError(GstVqaError):
    """Inconsistent dataset: bad manifest, mismatched lengths, empty splits."""


class FitError(GstVqaError):
    """A model-fitting routine failed to converge."""
