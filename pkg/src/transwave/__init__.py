"""Finite-difference toolkit for wave equations with an interface source on the periodic box."""

from .grid import GridFunction, TorusGrid, make_grid
from .timejets import CoefficientModel, Jet, compat_jets

__all__ = ["GridFunction", "TorusGrid", "make_grid", "CoefficientModel", "Jet", "compat_jets"]
__version__ = "0.1.0"
