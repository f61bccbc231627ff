"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
:class:`DataFormatError` exits 3, :class:`NumericalError` exits 4.
"""


class DpmwfError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(DpmwfError):
    """Malformed or mismatched input data (files, headers, dimensions)."""


class NumericalError(DpmwfError):
    """A numerical procedure failed beyond its documented tolerances."""
