"""Simulator and verification toolkit for 2D shallow water flow around a
fixed partially immersed obstacle with vertical sidewalls.

The exterior free-surface dynamics couple to the trapped water column
under the obstacle through a boundary flux operator (assembled once from
an interior elliptic solve) and a forced ODE for the boundary potential
trace. The package also implements the structural identities the model
carries: energy conservation, vorticity preservation, symmetrizer
algebra, boundary eigenstructure, compatibility conditions, and the
regularized-scheme behavior, each as a runtime-checkable operation.
"""

from .errors import (ConfigError, DockwaveError, GeometryError,
                     InvariantViolation, OutOfChartError, SolverAbort)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DockwaveError", "GeometryError", "InvariantViolation",
    "OutOfChartError", "SolverAbort", "__version__",
]
