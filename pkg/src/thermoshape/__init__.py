"""Regularized, time-discretized thermo-mechanical phase-transition solver with diagnostics."""

from __future__ import annotations

from .grid import Grid, GridMismatch, SolverError, laplacian_neumann, solve_helmholtz
from .regularization import BandViolation, EpsFamily, ModelFunctions
from .data_prep import InitialData, PreparedData, prepare
from .stepper import DiscreteState, SchemeParams, Trajectory, advance, run

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "GridMismatch",
    "SolverError",
    "laplacian_neumann",
    "solve_helmholtz",
    "BandViolation",
    "EpsFamily",
    "ModelFunctions",
    "InitialData",
    "PreparedData",
    "prepare",
    "DiscreteState",
    "SchemeParams",
    "Trajectory",
    "advance",
    "run",
]
