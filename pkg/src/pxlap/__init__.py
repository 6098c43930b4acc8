"""Explicit solver and a-priori estimate checks for regularized anisotropic
and isotropic p(x)-Laplacian parabolic problems on boxes."""

from .errors import *  # noqa: F401,F403
from .grid import Domain, Grid, ScalarField, build_grid, read_snapshot, write_snapshot
from .problem import ProblemSpec, make_problem
from .solver import Trajectory, solve, stable_dt, step
from .estimates import Constants, EstimateReport, compute_constants, compute_K, compute_M, verify
from .weakform import make_test_functions, weak_residual
from .continuation import epsilon_study

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "Grid",
    "ScalarField",
    "build_grid",
    "read_snapshot",
    "write_snapshot",
    "ProblemSpec",
    "make_problem",
    "Trajectory",
    "solve",
    "stable_dt",
    "step",
    "Constants",
    "EstimateReport",
    "compute_constants",
    "compute_K",
    "compute_M",
    "verify",
    "make_test_functions",
    "weak_residual",
    "epsilon_study",
]
