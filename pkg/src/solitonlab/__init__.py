"""Numerical laboratory for gKdV solitons, mKdV breathers and their stability."""

from .grid import Field, GridSpec
from .profiles import BreatherParams, SolitonParams

__all__ = ["Field", "GridSpec", "SolitonParams", "BreatherParams"]
__version__ = "0.1.0"
