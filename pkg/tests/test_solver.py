import math

import numpy as np
import pytest

from pmc.barriers import choose_C
from pmc.geometry import make_chart
from pmc.mesh import DIRICHLET, GridFunction, make_grid
from pmc.operator import make_problem, residual
from pmc.solver import (NewtonConfig, monotone_data_sequences, sandwich_solve,
                        solve_dirichlet)
from pmc.verify import comparison_check

from conftest import cap_height, cap_problem, hyperbolic_disc


def test_trivial_solves_immediately(warm_kernels):
    for problem in (
        cap_problem(17).with_H(0.0),
        make_problem(*hyperbolic_disc(1.0, (17, 24)), 0.0, 0.0),
    ):
        problem = make_problem(problem.chart, problem.grid, 0.0, 0.0)
        u, rep = solve_dirichlet(problem)
        assert rep.converged
        assert rep.iterations <= 2
        assert np.max(np.abs(u.values)) <= 1e-12


def test_cap_solution_second_order(warm_kernels):
    errs = {}
    for N in (33, 65):
        p = cap_problem(N)
        u, rep = solve_dirichlet(p)
        assert rep.converged
        exact = GridFunction.from_callable(p.grid, cap_height)
        errs[N] = float(np.max(np.abs(u.values - exact.values)))
    assert errs[65] <= 2e-3
    assert 3.5 <= errs[33] / errs[65] <= 4.5


def test_solution_respects_dirichlet_exactly(warm_kernels):
    p = cap_problem(17)
    u, rep = solve_dirichlet(p)
    d = p.grid.mask == DIRICHLET
    assert np.array_equal(u.values[d], p.phi[d])


def test_hyperbolic_solve_barrier_height(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.75)), (33, 96))
    p = make_problem(chart, grid, 0.5, lambda pt: np.sin(pt[..., 1]))
    u, rep = solve_dirichlet(p)
    assert rep.converged
    C = max(choose_C(0.5), 0.1)
    assert rep.sup_u <= 1.0 + C * math.pi + 1e-6


def test_report_invariants(warm_kernels):
    p = cap_problem(17)
    u, rep = solve_dirichlet(p)
    hist = rep.residual_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))  # damped decrease
    assert rep.converged and hist[-1] <= 1e-10
    js = rep.to_json()
    for key in ("converged", "iterations", "residual_history", "sup_u",
                "max_grad", "wall_ms"):
        assert key in js


def test_non_convergence_returns_best_iterate(warm_kernels):
    p = cap_problem(17)
    cfg = NewtonConfig(max_iter=1, continuation_steps=0, tol=1e-14)
    u, rep = solve_dirichlet(p, cfg)
    assert not rep.converged
    u.assert_finite()


def test_uniqueness_under_initial_guess(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.6)), (25, 64))
    p = make_problem(chart, grid, 0.3, lambda pt: 0.5 * np.sin(2 * pt[..., 1]))
    u1, r1 = solve_dirichlet(p)
    rng = np.random.default_rng(9)
    bumpy = p.boundary_field()
    interior = grid.mask == 0
    bumpy.values[interior] += 0.3 * rng.standard_normal(int(interior.sum()))
    if grid.has_pole:
        bumpy.set_pole(0.17)
    u2, r2 = solve_dirichlet(p, initial_guess=bumpy)
    assert r1.converged and r2.converged
    assert np.max(np.abs(u1.values - u2.values)) <= 1e-9


def test_comparison_principle_sample(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.6)), (17, 48))
    rng = np.random.default_rng(23)
    theta = grid.points()[..., 1]
    for _ in range(3):
        a = rng.uniform(-0.5, 0.5, 3)
        base = a[0] + a[1] * np.sin(theta) + a[2] * np.cos(2 * theta)
        gap = 0.05 + 0.3 * rng.random() * (1 + np.cos(theta - rng.random()))
        p1 = make_problem(chart, grid, 0.3, base)
        p2 = make_problem(chart, grid, 0.3, base + gap)
        u1, r1 = solve_dirichlet(p1)
        u2, r2 = solve_dirichlet(p2)
        assert r1.converged and r2.converged
        assert comparison_check(u1, u2, 1e-8).passed


def test_ellipticity_along_newton_iterates(warm_kernels):
    # smallest mixed eigenvalue of a stays >= gamma/w^2 at every accepted step
    from pmc.operator import evaluate_terms

    chart, grid = hyperbolic_disc(float(np.arctanh(0.7)), (25, 64))
    p = make_problem(chart, grid, 0.4, lambda pt: np.sin(pt[..., 1]))
    margins = []

    def watch(u, it):
        for node in map(tuple, grid.interior_nodes()[::97]):
            t = evaluate_terms(p, u, node)
            x = grid.node_coords(node)
            mixed = chart.metric(x) @ t.a
            gam = float(chart.gamma(x))
            margins.append(min(np.linalg.eigvals(mixed).real) - gam / t.w**2)

    u, rep = solve_dirichlet(p, NewtonConfig(callback=watch))
    assert rep.converged and margins
    assert min(margins) >= -1e-12


def test_iterative_linear_solver(warm_kernels):
    p = cap_problem(33)
    u_dir, r_dir = solve_dirichlet(p, NewtonConfig(linear_solver="direct"))
    u_it, r_it = solve_dirichlet(p, NewtonConfig(linear_solver="iterative"))
    assert r_dir.converged and r_it.converged
    assert np.max(np.abs(u_dir.values - u_it.values)) <= 1e-8


def test_mesh_sequencing_handles_fine_cold_start(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.75)), (49, 160))
    p = make_problem(chart, grid, 0.5, lambda pt: np.sin(pt[..., 1]))
    u, rep = solve_dirichlet(p)
    assert rep.converged
    assert rep.extras["globalization"] in ("cold", "mesh_sequencing",
                                           "mesh_sequencing+h_ramp")


# -- monotone boundary sequences --------------------------------------------


def test_monotone_sequences_constant():
    for k in (1, 2, 4, 8):
        lo, hi = monotone_data_sequences(lambda t: np.full_like(t, 2.0), k)
        t = np.linspace(0, 2 * math.pi, 37)
        assert np.allclose(lo(t), 2.0 - 1.0 / k, atol=1e-14)
        assert np.allclose(hi(t), 2.0 + 1.0 / k, atol=1e-14)


def test_monotone_sequences_sin():
    lo, hi = monotone_data_sequences(np.sin, 8)
    t = np.linspace(0, 2 * math.pi, 1000, endpoint=False)
    f = np.sin(t)
    assert np.all(lo(t) <= f) and np.all(f <= hi(t))
    assert np.max(np.abs(hi(t) - f)) <= 1.0 / 8 + 1e-6  # sin is one Fourier mode


def sawtooth(t):
    s = np.mod(np.asarray(t), 2 * math.pi) / (2 * math.pi)
    return 2 * np.abs(2 * (s - np.floor(s + 0.5))) - 1


def test_monotone_sequences_sawtooth_modulus_bound():
    # Lipschitz with constant L = 2/pi: deviation <= L/k + 1/k
    L = 2 / math.pi
    t = np.linspace(0, 2 * math.pi, 2000, endpoint=False)
    f = sawtooth(t)
    for k in (2, 4, 8):
        lo, hi = monotone_data_sequences(sawtooth, k)
        assert np.all(lo(t) <= f + 1e-12) and np.all(f <= hi(t) + 1e-12)
        dev = max(np.max(np.abs(hi(t) - f)), np.max(np.abs(lo(t) - f)))
        assert dev <= L / k + 1.0 / k + 1e-9


def test_monotone_sequences_are_monotone_in_k():
    t = np.linspace(0, 2 * math.pi, 800, endpoint=False)
    prev_lo = prev_hi = None
    for k in range(1, 11):
        lo, hi = monotone_data_sequences(sawtooth, k)
        lo_t, hi_t = lo(t), hi(t)
        if prev_lo is not None:
            assert np.all(lo_t >= prev_lo - 1e-12)  # increasing from below
            assert np.all(hi_t <= prev_hi + 1e-12)  # decreasing from above
        prev_lo, prev_hi = lo_t, hi_t


def test_monotone_sequences_reject_bad_data():
    with pytest.raises(ValueError):
        monotone_data_sequences(lambda t: np.full_like(t, np.nan), 2)
    with pytest.raises(ValueError):
        monotone_data_sequences(np.sin, 0)


# -- sandwich scheme ----------------------------------------------------------


def test_sandwich_smooth_data_matches_direct(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.6)), (17, 48))
    phi = lambda t: 0.4 * np.sin(t)
    p = make_problem(chart, grid, 0.2, lambda pt: phi(pt[..., 1]), phi_func=phi)
    u, rep, cert = sandwich_solve(p, schedule=(1, 2, 4))
    assert cert["ordered"]
    direct, drep = solve_dirichlet(
        make_problem(chart, grid, 0.2, lambda pt: phi(pt[..., 1])))
    assert np.max(np.abs(u.values - direct.values)) <= 2e-10


def test_sandwich_zero_curvature_pinches(warm_kernels):
    chart, grid = hyperbolic_disc(float(np.arctanh(0.6)), (17, 48))
    phi = lambda t: 0.3 * np.cos(t)
    p = make_problem(chart, grid, 0.0, lambda pt: phi(pt[..., 1]), phi_func=phi)
    u, rep, cert = sandwich_solve(p, schedule=(1, 2, 4, 8))
    sols = cert["solutions"][8]
    pinch = np.max(sols["v_up"].values - sols["v_lo"].values)
    # with H+ = H- = 0 the two comparison solves differ only through the
    # boundary envelopes, so the gap is at the boundary-convergence scale
    assert cert["ordered"]
    assert pinch <= 2 * (1.0 / 8) + 1e-6


def test_sandwich_requires_continuous_data(warm_kernels):
    chart, grid = hyperbolic_disc(0.8, (9, 12))
    p = make_problem(chart, grid, 0.0, 0.0)
    with pytest.raises(ValueError):
        sandwich_solve(p)
