"""Exception hierarchy shared by the whole toolkit.

Two failure families matter to callers: bad inputs (files, parameters,
shapes) and numerically degenerate data (zero energy, unusable spectra).
The command line maps them to exit codes 2 and 3 respectively.
"""


class GwxError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(GwxError):
    """Invalid parameters, shapes, ranges, or file contents."""


class ParseError(ValidationError):
    """Malformed input file; message carries the 1-based line number."""


class DegeneracyError(GwxError):
    """Numerically degenerate input: zero energy, all-zero spectra,
    non-decaying autocorrelations, or unsatisfiable binning."""
