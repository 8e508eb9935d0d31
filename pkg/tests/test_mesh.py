import math

import numpy as np
import pytest

from pmc.geometry import make_chart
from pmc.mesh import (DIRICHLET, INTERIOR, POLE, GridError, GridFunction,
                      covariant_hessian, gradient, interp_polar, make_grid,
                      pole_gradient)


def euclid_grid(N=17, disc=None):
    chart = make_chart("euclidean", 2, bounds=[[-0.5, 0.5], [-0.5, 0.5]])
    return chart, make_grid(chart, N, disc_radius=disc)


def polar_grid(shape=(17, 24), rho_max=1.2):
    chart = make_chart("hyperbolic_polar", 2, rho_max=rho_max, axis_patch=True)
    return chart, make_grid(chart, shape)


def test_grid_construction_and_mask():
    chart, grid = euclid_grid(9)
    assert grid.shape == (9, 9)
    assert np.all(grid.mask[0, :] == DIRICHLET)
    assert np.all(grid.mask[-1, :] == DIRICHLET)
    assert np.all(grid.mask[:, 0] == DIRICHLET)
    assert np.all(grid.mask[1:-1, 1:-1] == INTERIOR)
    assert grid.n_unknowns == 49

    _, pg = polar_grid((9, 12))
    assert np.all(pg.mask[0, :] == POLE)
    assert np.all(pg.mask[-1, :] == DIRICHLET)
    assert pg.n_unknowns == 7 * 12 + 1
    assert np.all(pg.slot[0, :] == pg.n_unknowns - 1)


def test_grid_validation():
    chart = make_chart("euclidean", 2)
    with pytest.raises(GridError):
        make_grid(chart, (2, 5))
    pol = make_chart("hyperbolic_polar", 2, rho_max=1.0, axis_patch=True)
    with pytest.raises(GridError):
        make_grid(pol, (9, 3))  # periodic axis needs >= 4
    off_origin = make_chart("euclidean", 2, bounds=[[0.1, 1.0], [0.1, 1.0]])
    with pytest.raises(GridError):
        make_grid(off_origin, (9, 9), disc_radius=0.05)  # no interior left
    with pytest.raises(GridError):
        make_grid(pol, (9, 12), disc_radius=0.5)  # disc masks are flat-chart only


def test_disc_mask():
    chart, grid = euclid_grid(33, disc=0.5)
    pts = grid.points()
    r2 = np.sum(pts**2, axis=-1)
    assert np.all(grid.mask[r2 >= 0.25] == DIRICHLET)
    assert np.all(grid.mask[r2 < 0.25 * (1 - 1e-12)] == INTERIOR)


def test_gradient_exactness():
    chart, grid = euclid_grid(17)
    const = GridFunction.constant(grid, 4.2)
    assert np.allclose(gradient(const, (8, 8)), 0.0, atol=1e-14)
    lin = GridFunction.from_callable(grid, lambda p: p[..., 0])
    g = gradient(lin, (8, 8))
    assert abs(g[0] - 1.0) <= 1e-12 and abs(g[1]) <= 1e-12
    with pytest.raises(GridError):
        gradient(lin, (0, 4))


def test_gradient_hyperbolic_radial():
    chart, grid = polar_grid()
    f = GridFunction.from_callable(grid, lambda p: p[..., 0])
    g = gradient(f, (8, 5))
    # contravariant components: sigma^{rho rho} = 1
    assert abs(g[0] - 1.0) <= 1e-10 and abs(g[1]) <= 1e-12


def test_hessian_exactness():
    chart, grid = euclid_grid(17)
    quad = GridFunction.from_callable(grid, lambda p: p[..., 0] ** 2)
    Hc = covariant_hessian(quad, (8, 8))
    assert np.max(np.abs(Hc - np.diag([2.0, 0.0]))) <= 1e-10
    const = GridFunction.constant(grid, 1.0)
    assert np.max(np.abs(covariant_hessian(const, (8, 8)))) == 0.0


def test_hessian_hyperbolic_radial():
    # u = rho: the theta-theta component is -Gamma^rho_{theta theta} * 1
    # = +sinh(rho) cosh(rho)
    chart, grid = polar_grid((33, 48))
    f = GridFunction.from_callable(grid, lambda p: p[..., 0])
    node = (16, 7)
    rho = grid.axes[0][node[0]]
    Hc = covariant_hessian(f, node)
    assert Hc[1, 1] == pytest.approx(math.sinh(rho) * math.cosh(rho), rel=1e-10)
    with pytest.raises(GridError):
        covariant_hessian(f, (0, 0))  # pole is not interior


def test_stencils_second_order():
    chart = make_chart("euclidean", 2, bounds=[[-0.5, 0.5], [-0.5, 0.5]])
    f = lambda p: np.sin(2 * p[..., 0]) * np.cos(p[..., 1])
    hess_exact = lambda x: np.array([
        [-4 * math.sin(2 * x[0]) * math.cos(x[1]), -2 * math.cos(2 * x[0]) * math.sin(x[1])],
        [-2 * math.cos(2 * x[0]) * math.sin(x[1]), -math.sin(2 * x[0]) * math.cos(x[1])],
    ])
    errs = []
    for N in (17, 33):
        grid = make_grid(chart, N)
        u = GridFunction.from_callable(grid, f)
        worst = 0.0
        for node in [(N // 2, N // 2), (N // 4, 3 * N // 4), (3 * N // 4, N // 4)]:
            x = grid.node_coords(node)
            worst = max(worst, np.max(np.abs(covariant_hessian(u, node) - hess_exact(x))))
        errs.append(worst)
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_pole_gradient_linear():
    # f = x = rho cos(theta): gradient at the pole is (1, 0) in the patch frame
    chart, grid = polar_grid((33, 64))
    f = GridFunction.from_callable(grid, lambda p: p[..., 0] * np.cos(p[..., 1]))
    g = pole_gradient(f)
    assert np.max(np.abs(g - [1.0, 0.0])) <= 1e-10
    assert np.allclose(gradient(f, (0, 3)), g)


def test_gridfunction_validation():
    chart, grid = euclid_grid(9)
    with pytest.raises(GridError):
        GridFunction(grid, np.zeros((3, 3)))
    u = GridFunction.constant(grid, 1.0)
    u.values[2, 2] = np.inf
    with pytest.raises(GridError):
        u.assert_finite()


def test_csv_round_trip(tmp_path):
    chart, grid = polar_grid((9, 12))
    rng = np.random.default_rng(5)
    u = GridFunction(grid, rng.standard_normal(grid.shape))
    u.set_pole(u.values[0, 0])
    path = tmp_path / "u.csv"
    u.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "i,j,coord1,coord2,value"
    v = GridFunction.from_csv(path, grid)
    assert np.array_equal(u.values, v.values)  # bit-exact decimal round trip


def test_interp_polar():
    chart, grid = polar_grid((33, 64), rho_max=1.0)
    f = GridFunction.from_callable(grid, lambda p: p[..., 0] * np.cos(p[..., 1]))
    rho = np.array([0.0, 0.31, 0.77])
    th = np.array([0.2, 3.9, 6.2])
    vals = interp_polar(f, rho, th)
    assert np.max(np.abs(vals - rho * np.cos(th))) <= 2e-3  # bilinear O(h^2)
