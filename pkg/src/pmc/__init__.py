"""Prescribed mean curvature solver for Killing graphs.

Dirichlet problems for the quasilinear mean curvature equation of Killing
graphs on Riemannian charts, the monotone-data sandwich scheme for merely
continuous boundary values, closed-form hyperbolic barriers, and the
geodesic-ball exhaustion for the asymptotic Dirichlet problem in hyperbolic
space, with an independent embedding-based mean curvature oracle.
"""

from .barriers import BarrierSpec, barrier_h, barrier_value, choose_C, q_radial
from .exhaustion import AsymptoticProblem, ExhaustionReport, solve_asymptotic
from .geometry import Chart, make_chart
from .mesh import Grid, GridFunction, make_grid
from .operator import PMCProblem, make_problem
from .solver import (NewtonConfig, SolveReport, monotone_data_sequences,
                     sandwich_solve, solve_dirichlet)
from .verify import certificate_evaluate, comparison_check, mean_curvature_oracle

__version__ = "0.1.0"

__all__ = [
    "AsymptoticProblem",
    "BarrierSpec",
    "Chart",
    "ExhaustionReport",
    "Grid",
    "GridFunction",
    "NewtonConfig",
    "PMCProblem",
    "SolveReport",
    "barrier_h",
    "barrier_value",
    "certificate_evaluate",
    "choose_C",
    "comparison_check",
    "make_chart",
    "make_grid",
    "make_problem",
    "mean_curvature_oracle",
    "monotone_data_sequences",
    "q_radial",
    "sandwich_solve",
    "solve_asymptotic",
    "solve_dirichlet",
]
