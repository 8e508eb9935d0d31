import math

import numpy as np
import pytest

from pmc.geometry import (ChartError, cylinder_mean_curvature, flow_line_curvature,
                          make_chart, ricci_lower_bound_probe, validate_chart)


def sample_points(chart, m=40, seed=3):
    rng = np.random.default_rng(seed)
    lo = np.array(chart.lows, dtype=float)
    hi = np.array(chart.highs, dtype=float)
    span = hi - lo
    pts = lo + span * (0.1 + 0.8 * rng.random((m, chart.n)))
    return pts


def test_make_chart_errors():
    with pytest.raises(ChartError):
        make_chart("nope", 2)
    with pytest.raises(ChartError):
        make_chart("euclidean", 0)
    with pytest.raises(ChartError):
        make_chart("euclidean", 2, bounds=[[1, -1], [0, 1]])
    with pytest.raises(ChartError):
        make_chart("hyperbolic_polar", 2, rho_max=1.0, rho_min=0.0)
    with pytest.raises(ChartError):
        make_chart("hyperbolic_polar", 4, rho_max=1.0)
    with pytest.raises(ChartError):
        make_chart("rotational", 2, bounds=[[-1, 1], [-0.2, 1]])
    with pytest.raises(ChartError):
        make_chart("euclidean", 2, wrong_param=1)


def test_euclidean_gamma_is_one():
    chart = make_chart("euclidean", 2)
    pts = sample_points(chart)
    assert np.all(chart.gamma(pts) == 1.0)
    assert np.all(chart.grad_gamma(pts) == 0.0)


def test_hyperbolic_gamma_values():
    chart = make_chart("hyperbolic_polar", 2, rho_max=2.0, axis_patch=True)
    # direct evaluation: gamma = 1 - tanh^2(rho)
    assert chart.gamma(np.array([math.atanh(0.5), 0.3])) == pytest.approx(0.75, abs=1e-15)
    assert chart.gamma(np.array([0.0, 0.0])) == 1.0


@pytest.mark.parametrize("kind,kw", [
    ("euclidean", {"n": 2}),
    ("euclidean", {"n": 3}),
    ("hyperbolic_polar", {"n": 2, "rho_max": 2.5, "rho_min": 0.05}),
    ("hyperbolic_polar", {"n": 3, "rho_max": 2.0, "rho_min": 0.05}),
    ("rotational", {"n": 2}),
    ("rotational", {"n": 3}),
])
def test_chart_invariants(kind, kw):
    n = kw.pop("n")
    chart = make_chart(kind, n, **kw)
    report = validate_chart(chart, sample_points(chart))
    assert report["min_metric_eig"] > 0
    assert report["inverse_dev"] <= 1e-12
    assert report["symmetry_dev"] == 0.0
    assert report["min_gamma"] > 0
    assert report["grad_gamma_dev"] <= 1e-8


def test_grad_gamma_fd_second_order():
    chart = make_chart("hyperbolic_polar", 2, rho_max=2.0, axis_patch=True)
    pts = sample_points(chart)
    dev1 = validate_chart(chart, pts, probe_step=2e-4)["grad_gamma_dev"]
    dev2 = validate_chart(chart, pts, probe_step=1e-4)["grad_gamma_dev"]
    assert 3.0 < dev1 / dev2 < 5.0  # central differences converge at O(h^2)


def test_gamma_cosh_identity():
    chart = make_chart("hyperbolic_polar", 2, rho_max=3.0, axis_patch=True)
    rho = np.linspace(0.0, 3.0, 200)
    pts = np.stack([rho, np.zeros_like(rho)], axis=-1)
    assert np.max(np.abs(chart.gamma(pts) * np.cosh(rho) ** 2 - 1.0)) <= 1e-14


def test_flow_line_curvature():
    chart = make_chart("hyperbolic_polar", 2, rho_max=3.5, axis_patch=True)
    assert flow_line_curvature(chart, 0.0) == 0.0
    # tanh(rho_k) = 1 - 1/k identically
    assert flow_line_curvature(chart, math.atanh(1 - 0.5)) == pytest.approx(0.5, abs=1e-15)
    assert flow_line_curvature(chart, 1.0) == pytest.approx(0.7615941559557649, abs=1e-12)
    with pytest.raises(ChartError):
        flow_line_curvature(make_chart("euclidean", 2), 1.0)


def test_kappa_equals_dgamma_over_2gamma():
    # gamma'/(2 gamma) with the prime along d = rho_k - rho
    chart = make_chart("hyperbolic_polar", 2, rho_max=3.0, axis_patch=True)
    rng = np.random.default_rng(11)
    rho = rng.uniform(1e-3, 3.0, size=100)
    pts = np.stack([rho, np.zeros_like(rho)], axis=-1)
    dgamma_dd = -chart.grad_gamma(pts)[:, 0]
    kappa = dgamma_dd / (2.0 * chart.gamma(pts))
    assert np.max(np.abs(kappa - np.tanh(rho))) <= 1e-10


def test_cylinder_mean_curvature_values():
    hyp2 = make_chart("hyperbolic_polar", 2, rho_max=2.0, axis_patch=True)
    hyp3 = make_chart("hyperbolic_polar", 3, rho_max=2.0, rho_min=0.05)
    # coth(rho_k) = k/(k-1): at k = 2 both coth = 2 and tanh = 1/2
    assert cylinder_mean_curvature(hyp2, math.atanh(0.5)) == pytest.approx(1.25, abs=1e-14)
    assert cylinder_mean_curvature(hyp3, math.atanh(0.5)) == pytest.approx(1.5, abs=1e-14)
    euc = make_chart("euclidean", 2)
    assert cylinder_mean_curvature(euc, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert cylinder_mean_curvature(euc, np.array([0.6, 0.8])) == pytest.approx(0.5)
    with pytest.raises(ChartError):
        cylinder_mean_curvature(hyp2, 0.0)


def test_cylinder_curvature_limits():
    chart = make_chart("hyperbolic_polar", 2, rho_max=30.0, axis_patch=True)
    rho = np.linspace(1e-3, 8.0, 500)  # strict decrease up to float saturation
    H = cylinder_mean_curvature(chart, np.stack([rho, 0 * rho], axis=-1))
    assert np.all(np.diff(H) < 0)          # monotone decreasing
    assert H[0] > 100.0                    # blows up toward the pole
    assert np.all(H > 1.0)
    assert cylinder_mean_curvature(chart, 30.0) == pytest.approx(1.0, abs=1e-12)


def test_laplacian_of_radial_coordinate():
    # sigma^{ij} (d_i d_j rho - Gamma^k_ij d_k rho) = (n-1) coth(rho)
    chart = make_chart("hyperbolic_polar", 2, rho_max=2.5, axis_patch=True)
    rho = np.linspace(0.2, 2.4, 50)
    pts = np.stack([rho, np.full_like(rho, 1.1)], axis=-1)
    sinv = chart.metric_inv(pts)
    Gam = chart.christoffel(pts)
    lap = -np.einsum("mij,mij->m", sinv, Gam[:, 0])  # d rho = (1, 0), no 2nd derivs
    assert np.max(np.abs(lap - 1.0 / np.tanh(rho))) <= 1e-8


def test_ricci_probe():
    euc = make_chart("euclidean", 2)
    assert abs(ricci_lower_bound_probe(euc, sample_points(euc, 10))) <= 1e-9
    hyp = make_chart("hyperbolic_polar", 2, rho_max=2.0, rho_min=0.2)
    val = ricci_lower_bound_probe(hyp, sample_points(hyp, 12))
    assert val == pytest.approx(-1.0, abs=1e-4)
    rot = make_chart("rotational", 2)
    val_rot = ricci_lower_bound_probe(rot, sample_points(rot, 8))
    assert np.isfinite(val_rot)
    assert abs(val_rot) <= 1e-8  # flat chart
    with pytest.raises(ChartError):
        ricci_lower_bound_probe(euc, np.empty((0, 2)))


def test_geodesic_distance():
    hyp = make_chart("hyperbolic_polar", 2, rho_max=3.0, axis_patch=True)
    o = np.array([0.0, 0.0])
    x = np.array([1.3, 0.7])
    assert hyp.geodesic_distance(x, o) == pytest.approx(1.3, abs=1e-12)
    # symmetric and triangle-consistent on a diameter
    a = np.array([0.5, 0.0])
    b = np.array([0.7, math.pi])
    assert hyp.geodesic_distance(a, b) == pytest.approx(1.2, abs=1e-12)
    euc = make_chart("euclidean", 2)
    assert euc.geodesic_distance(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0)
