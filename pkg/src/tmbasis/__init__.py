"""Takenaka-Malmquist rational orthogonal systems on the unit disk.

Submodules
----------
core           poles, pole schemes and basis evaluation
boundary       boundary grids, signals, L^p norms and maximal functions
norms          coefficient trees and the square-function norms
unconditional  sign-flip experiments and bound scans
zoo            analytic test functions and the default corpus
"""

__version__ = "0.1.0"

from .boundary import BoundaryGrid, BoundarySignal, lp_norm
from .core import DyadicIndex, Head, Pole, PoleScheme, SchemeKind, tm_basis_eval
from .errors import (GridMismatchError, IndexOutOfRangeError, InvalidPoleError,
                     NumericalGateError, ParameterError, ResolutionError, TMError)
from .norms import CoefficientTree, analyze, hp_square_norm, np_functional, synthesize

__all__ = [
    "__version__",
    "BoundaryGrid", "BoundarySignal", "lp_norm",
    "DyadicIndex", "Head", "Pole", "PoleScheme", "SchemeKind", "tm_basis_eval",
    "CoefficientTree", "analyze", "synthesize", "hp_square_norm", "np_functional",
    "TMError", "InvalidPoleError", "IndexOutOfRangeError", "ParameterError",
    "GridMismatchError", "ResolutionError", "NumericalGateError",
]
