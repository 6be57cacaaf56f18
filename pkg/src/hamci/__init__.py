"""Autonomous-Hamiltonian convex integration for the continuity equation on the torus."""
from .errors import *  # noqa: F401,F403
from .field import (GridSpec, PeriodicScalarField, PeriodicVectorField, TimeField, apply_J,
                    divergence, gradient, laplacian, lp_norm, sobolev_norm, symplectic_gradient,
                    time_derivative)

__version__ = "0.1.0"
