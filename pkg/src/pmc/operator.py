"""The prescribed mean curvature operator, its residual and linearization.

A Killing graph над the chart domain has mean curvature H exactly when

    a^{ij} u_{i;j} - R <grad gamma, grad u> = n H w

with w = sqrt(gamma + |grad u|^2), a^{ij} = sigma^{ij} - u^i u^j / w^2 and
R = (gamma + w^2) / (2 gamma w^2).  The solver works with the w-scaled
residual F = a^{ij} u_{i;j} - R <grad gamma, grad u> - n H w, whose zero set
coincides with the discrete solutions; the divergence form Q[u] = F/w + nH
is exposed separately for verification.

The orientation is fixed throughout by the Gauss map
N = (gamma Y - grad u) / w, whose Killing component is positive: constant
slices are minimal, downward bowls have H > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .geometry import Chart
from .mesh import DIRICHLET, INTERIOR, POLE, Grid, GridFunction, covariant_hessian, gradient

__all__ = [
    "PMCProblem",
    "OperatorTerms",
    "DirichletMismatch",
    "make_problem",
    "evaluate_terms",
    "q_divergence_form",
    "residual",
    "jacobian",
    "max_gradient_norm",
]

ORIENTATION_NOTE = "Gauss map N = (gamma Y - grad u)/w with positive Killing component"


class DirichletMismatch(ValueError):
    """State does not match the boundary data on Dirichlet nodes."""


@dataclass
class PMCProblem:
    """Chart + grid + prescribed curvature field + Dirichlet data."""

    chart: Chart
    grid: Grid
    H: np.ndarray
    phi: np.ndarray
    orientation: str = ORIENTATION_NOTE
    phi_func: Optional[Callable] = None  # continuous boundary data, if known
    _tables: object = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.H.shape != self.grid.shape or self.phi.shape != self.grid.shape:
            raise ValueError("H and phi must be full-grid arrays")
        if not np.all(np.isfinite(self.H[self.grid.mask != DIRICHLET])):
            raise ValueError("H is not finite at interior nodes")
        if not np.all(np.isfinite(self.phi[self.grid.mask == DIRICHLET])):
            raise ValueError("phi is not finite at Dirichlet nodes")

    def tables(self):
        if self._tables is None:
            self._tables = kernels.build_tables(self.chart, self.grid, self.H)
        return self._tables

    def with_H(self, H_new) -> "PMCProblem":
        return make_problem(self.chart, self.grid, H_new, self.phi,
                            phi_func=self.phi_func)

    def boundary_field(self) -> GridFunction:
        """Grid function equal to phi on Dirichlet nodes and zero elsewhere."""
        vals = np.zeros(self.grid.shape)
        d = self.grid.mask == DIRICHLET
        vals[d] = self.phi[d]
        return GridFunction(self.grid, vals)

    def apply_boundary(self, u: GridFunction):
        d = self.grid.mask == DIRICHLET
        u.values[d] = self.phi[d]


def _as_field(grid: Grid, data) -> np.ndarray:
    if callable(data):
        return GridFunction.from_callable(grid, data).values
    if np.isscalar(data):
        return np.full(grid.shape, float(data))
    return np.asarray(data, dtype=float)


def make_problem(chart: Chart, grid: Grid, H, phi, phi_func=None) -> PMCProblem:
    """Build a problem from constants, callables on coordinates, or arrays."""
    return PMCProblem(chart, grid, _as_field(grid, H), _as_field(grid, phi),
                      phi_func=phi_func if phi_func is not None
                      else (phi if callable(phi) else None))


@dataclass
class OperatorTerms:
    w: float
    a: np.ndarray
    R: float


def evaluate_terms(problem: PMCProblem, u: GridFunction, node) -> OperatorTerms:
    """(w, a^{ij}, R) at an interior node from the discrete gradient of u."""
    node = tuple(node)
    if problem.grid.mask[node] != INTERIOR:
        raise ValueError(f"node {node} is not interior")
    x = problem.grid.node_coords(node)
    sinv = problem.chart.metric_inv(x)
    gam = float(problem.chart.gamma(x))
    from .mesh import _partials_at

    g = _partials_at(u, node)
    uc = sinv @ g
    w2 = gam + float(g @ uc)
    w = np.sqrt(w2)
    a = sinv - np.outer(uc, uc) / w2
    R = (gam + w2) / (2 * gam * w2)
    return OperatorTerms(w=w, a=a, R=R)


def q_divergence_form(problem: PMCProblem, u: GridFunction, node) -> float:
    """Q[u] at a node; equals n H(node) when u has mean curvature H."""
    node = tuple(node)
    terms = evaluate_terms(problem, u, node)
    x = problem.grid.node_coords(node)
    from .mesh import _partials_at

    g = _partials_at(u, node)
    Hc = covariant_hessian(u, node)
    dgc = problem.chart.grad_gamma(x)
    gg = float(dgc @ g)
    return float((np.sum(terms.a * Hc) - terms.R * gg) / terms.w)


def _check_boundary(problem: PMCProblem, u: GridFunction, tol=1e-12):
    d = problem.grid.mask == DIRICHLET
    dev = np.max(np.abs(u.values[d] - problem.phi[d])) if np.any(d) else 0.0
    if dev > tol:
        raise DirichletMismatch(
            f"state deviates from phi by {dev:.3e} on Dirichlet nodes"
        )


def residual(problem: PMCProblem, u: GridFunction, backend=None) -> np.ndarray:
    """w-scaled residual over the unknowns; zero iff u is a discrete solution."""
    _check_boundary(problem, u)
    return kernels.assemble_residual(u.values, problem.tables(), backend)


def jacobian(problem: PMCProblem, u: GridFunction, backend=None) -> sp.csr_matrix:
    """Analytic Jacobian of the residual over the unknown stencil."""
    _check_boundary(problem, u)
    return kernels.assemble_jacobian(u.values, problem.tables(), backend)


def max_gradient_norm(problem: PMCProblem, u: GridFunction) -> float:
    """Max metric norm of grad u over interior nodes (and the pole)."""
    norms = kernels.gradient_norms(u.values, problem.tables())
    return float(np.max(norms)) if norms.size else 0.0
