import math

import numpy as np
import pytest

from pmc.geometry import make_chart
from pmc.mesh import GridFunction, make_grid
from pmc.operator import make_problem


def cap_height(pts):
    return np.sqrt(1.0 - pts[..., 0] ** 2 - pts[..., 1] ** 2)


def cap_problem(N):
    """Spherical cap ground truth: euclidean disc radius 0.5, H = -1."""
    chart = make_chart("euclidean", 2, bounds=[[-0.5, 0.5], [-0.5, 0.5]])
    grid = make_grid(chart, N, disc_radius=0.5)
    return make_problem(chart, grid, -1.0, cap_height)


def hyperbolic_disc(rho_max, shape, axis_patch=True, **chart_kw):
    chart = make_chart("hyperbolic_polar", 2, rho_max=rho_max,
                       axis_patch=axis_patch, **chart_kw)
    return chart, make_grid(chart, shape)


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile/load the numba kernels once so timed tests measure math."""
    from pmc import kernels

    chart, grid = hyperbolic_disc(0.8, (9, 12))
    problem = make_problem(chart, grid, 0.1, 0.0)
    u = GridFunction(grid)
    for backend in ("numpy", "numba"):
        try:
            kernels.assemble_residual(u.values, problem.tables(), backend)
            kernels.assemble_jacobian(u.values, problem.tables(), backend)
        except RuntimeError:
            pass
    chart2 = make_chart("euclidean", 2)
    grid2 = make_grid(chart2, 9)
    problem2 = make_problem(chart2, grid2, 0.0, 0.0)
    kernels.assemble_residual(GridFunction(grid2).values, problem2.tables())
    kernels.assemble_jacobian(GridFunction(grid2).values, problem2.tables())
    return True
