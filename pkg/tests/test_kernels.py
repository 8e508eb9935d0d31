import numpy as np
import pytest

from pmc import kernels
from pmc.geometry import make_chart
from pmc.mesh import GridFunction, make_grid
from pmc.operator import make_problem

from conftest import hyperbolic_disc


def random_state(grid, seed=0):
    rng = np.random.default_rng(seed)
    u = GridFunction(grid, rng.standard_normal(grid.shape) * 0.2)
    if grid.has_pole:
        u.set_pole(u.values[0, 0])
    return u


def test_resolve_backend(monkeypatch):
    assert kernels.resolve_backend("numpy") == "numpy"
    assert kernels.resolve_backend("numba") == "numba"
    monkeypatch.setenv("PMC_BACKEND", "numpy")
    assert kernels.resolve_backend() == "numpy"
    monkeypatch.setenv("PMC_BACKEND", "auto")
    assert kernels.resolve_backend() in ("numba", "numpy")
    with pytest.raises(ValueError):
        kernels.resolve_backend("cuda")


@pytest.mark.parametrize("case", ["euclidean", "hyperbolic", "rotational"])
def test_backend_equivalence(case, warm_kernels):
    if case == "euclidean":
        chart = make_chart("euclidean", 2, bounds=[[-0.5, 0.5], [-0.5, 0.5]])
        grid = make_grid(chart, (11, 13), disc_radius=0.5)
    elif case == "hyperbolic":
        chart, grid = hyperbolic_disc(1.1, (11, 16))
    else:
        chart = make_chart("rotational", 2)
        grid = make_grid(chart, (11, 13))
    problem = make_problem(chart, grid, lambda p: 0.3 + 0.1 * p[..., 0], 0.0)
    T = problem.tables()
    u = random_state(grid, seed=4)
    r_np = kernels.assemble_residual(u.values, T, "numpy")
    r_nb = kernels.assemble_residual(u.values, T, "numba")
    assert np.max(np.abs(r_np - r_nb)) <= 1e-13 * max(1, np.max(np.abs(r_np)))
    J_np = kernels.assemble_jacobian(u.values, T, "numpy")
    J_nb = kernels.assemble_jacobian(u.values, T, "numba")
    dev = np.abs((J_np - J_nb).toarray()).max()
    assert dev <= 1e-13 * max(1, np.abs(J_np.toarray()).max())


def test_row_scale_identity_on_flat_charts():
    chart = make_chart("euclidean", 2)
    grid = make_grid(chart, (9, 9))
    T = kernels.build_tables(chart, grid, np.zeros(grid.shape))
    assert np.all(T.row_scale == 1.0)


def test_row_scale_tames_pole_rows():
    chart, grid = hyperbolic_disc(1.0, (17, 48))
    T = kernels.build_tables(chart, grid, np.zeros(grid.shape))
    ring1 = grid.slot[1, 0]
    assert T.row_scale[ring1] < 0.1
    rim_adjacent = grid.slot[-2, 0]
    assert T.row_scale[rim_adjacent] == 1.0


def test_pole_tables_patch_values():
    chart, grid = hyperbolic_disc(1.0, (9, 12))
    T = kernels.build_tables(chart, grid, np.zeros(grid.shape))
    assert T.gamma[0, 0] == 1.0
    assert np.all(T.dgc[0] == 0.0)
    assert np.allclose(T.sinv[0, 0], np.eye(2))
    assert np.all(T.Gam[0] == 0.0)


def test_gradient_norms_contains_pole():
    chart, grid = hyperbolic_disc(1.0, (17, 32))
    problem = make_problem(chart, grid, 0.0, 0.0)
    u = GridFunction.from_callable(grid, lambda p: p[..., 0] * np.cos(p[..., 1]))
    norms = kernels.gradient_norms(u.values, problem.tables())
    assert norms.size == grid.n_unknowns
    assert norms[-1] == pytest.approx(1.0, abs=1e-8)  # pole gradient of x
