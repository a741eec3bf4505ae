"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so keep the classes distinct.
"""


class TMError(Exception):
    """Base class for errors raised by tmbasis."""


class InvalidPoleError(TMError, ValueError):
    """A pole lies on or outside the unit circle."""


class IndexOutOfRangeError(TMError, IndexError):
    """A basis or dyadic index is not valid for the scheme."""


class ParameterError(TMError, ValueError):
    """A numeric parameter (exponent, trial count, ...) is out of range."""


class GridMismatchError(TMError, ValueError):
    """Two boundary signals live on different grids."""


class ResolutionError(TMError, ValueError):
    """The grid is too coarse for the requested computation."""


class NumericalGateError(TMError, RuntimeError):
    """A self-check or convergence gate failed."""
