"""Intertwining relations for non-stationary Schrodinger and diffusion equations."""

from .errors import ConfigError, DomainError, IntertwineError
from .fields import ComplexField, Grid1D, Snapshots, TimeGrid, make_grid

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "IntertwineError", "ComplexField", "Grid1D",
           "Snapshots", "TimeGrid", "make_grid"]
