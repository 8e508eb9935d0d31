"""Independent verification of solved graphs.

The mean curvature oracle re-derives H from the embedding: it builds the
ambient warped-product metric sigma + (1/gamma) ds^2, its Christoffel
symbols from the standard warped-product formulas, the graph tangent frame
E_i = d_i + u_i d_s and the Gauss-map normal, and traces the second
fundamental form against the numerically inverted induced metric.  Nothing
is shared with the operator module beyond the chart evaluators and the
finite differences of u, so a sign or coefficient error there cannot cancel
here.

``certificate_evaluate`` assembles the interior gradient-bound certificate:
the explicit constants

    D  = 32 gamma0 / (r^2 gamma0 + 256 u0^2),
    C2 = gamma1 + 16 u0 / r,
    W  = C2 e^{C1} / (e^{C1/2} - 1),

for a negative solution with u0 = -u(o) on a ball of radius r where
gamma0 <= gamma <= gamma1.  The slope constant C1 must dominate
non-explicit constants, so W is reported as a conditional bound and never
asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Chart
from .mesh import DIRICHLET, INTERIOR, POLE, GridFunction, pole_gradient

__all__ = [
    "mean_curvature_oracle",
    "oracle_field",
    "oracle_nodes",
    "oracle_deviation",
    "ComparisonCertificate",
    "comparison_check",
    "GradientBoundCertificate",
    "certificate_from_values",
    "certificate_evaluate",
    "gradient_norm_at",
]


def _d1(values, axis, h):
    """Fourth-order centered first derivative along one axis."""
    f = lambda s: np.roll(values, -s, axis=axis)
    return (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)


def _array_partials(values: np.ndarray, grid):
    """Fourth-order centered first and second partials on the full grid.

    The oracle deliberately differences u at a different order than the
    operator module (which is second-order), so that on a solved discrete
    state the two disagree exactly by the scheme's truncation error instead
    of cancelling identically.  Wrapped entries near non-periodic edges are
    garbage; callers restrict to nodes with the full wide stencil.
    """
    nd = grid.ndim
    h = grid.spacings
    first = np.empty((nd,) + values.shape)
    second = np.empty((nd, nd) + values.shape)
    for a in range(nd):
        f = lambda s: np.roll(values, -s, axis=a)
        first[a] = _d1(values, a, h[a])
        second[a, a] = (-f(2) + 16 * f(1) - 30 * values + 16 * f(-1) - f(-2)) / (
            12 * h[a] ** 2
        )
        for b in range(a + 1, nd):
            mixed = _d1(_d1(values, a, h[a]), b, h[b])
            second[a, b] = mixed
            second[b, a] = mixed
    return first, second


def _wide_stencil_ok(grid) -> np.ndarray:
    """Nodes whose width-5 stencil block consists of regular samples only.

    Dirichlet nodes carry prescribed data and the pole patch is a single
    averaged unknown with a first-order coupling; stencils touching either
    are not pure regular samples of the discrete solution (the error field
    is kinked there and the oracle's convergence rate degrades), so the
    oracle domain excludes them.
    """
    bad = grid.mask != INTERIOR
    near = np.zeros_like(bad)
    from itertools import product

    for offsets in product(range(-2, 3), repeat=grid.ndim):
        shifted = bad
        for a, o in enumerate(offsets):
            if o:
                shifted = np.roll(shifted, -o, axis=a)
        near |= shifted
    # rolls wrap across non-periodic edges, but the phantom flags only land
    # within two layers of a real edge, which the real edge already excludes
    return (grid.mask == INTERIOR) & ~near


def oracle_nodes(grid) -> np.ndarray:
    """Interior nodes carrying the oracle's full (width-5) stencil."""
    return np.argwhere(_wide_stencil_ok(grid))


def oracle_field(chart: Chart, u: GridFunction, nodes=None):
    """Oracle mean curvature at interior nodes with a full wide stencil.

    Returns (nodes, H) where nodes is an (M, ndim) index array and H the
    oracle values.  The default node set is ``oracle_nodes(grid)``.
    """
    grid = u.grid
    if nodes is None:
        nodes = oracle_nodes(grid)
    nodes = np.atleast_2d(np.asarray(nodes, dtype=int))
    idx = tuple(nodes.T)
    first, second = _array_partials(u.values, grid)
    n = grid.ndim
    pts = grid.points()[idx]
    sigma = chart.metric(pts)
    sinv = chart.metric_inv(pts)
    Gam = chart.christoffel(pts)
    gamma = chart.gamma(pts)
    dgc = chart.grad_gamma(pts)
    g = np.stack([first[a][idx] for a in range(n)], axis=-1)
    S = np.empty(g.shape[:-1] + (n, n))
    for a in range(n):
        for b in range(n):
            S[..., a, b] = second[a, b][idx]

    lam = 1.0 / gamma
    gam_cov = np.einsum("mij,mj->mi", sigma, dgc)
    lam_cov = -gam_cov / gamma[:, None] ** 2

    N = n + 1
    Gbar = np.zeros((len(gamma), N, N, N))
    Gbar[:, :n, :n, :n] = Gam
    Gbar[:, :n, n, n] = -0.5 * np.einsum("mkl,ml->mk", sinv, lam_cov)
    half = lam_cov / (2.0 * lam[:, None])
    Gbar[:, n, :n, n] = half
    Gbar[:, n, n, :n] = half

    E = np.zeros((len(gamma), n, N))
    for i in range(n):
        E[:, i, i] = 1.0
    E[:, :, n] = g

    DE = np.einsum("mabc,mib,mjc->mija", Gbar, E, E)
    DE[..., n] += S

    ucontra = np.einsum("mkl,ml->mk", sinv, g)
    w = np.sqrt(gamma + np.einsum("mk,mk->m", g, ucontra))
    Nvec = np.zeros((len(gamma), N))
    Nvec[:, :n] = -ucontra / w[:, None]
    Nvec[:, n] = gamma / w
    norm2 = (np.einsum("mij,mi,mj->m", sigma, Nvec[:, :n], Nvec[:, :n])
             + lam * Nvec[:, n] ** 2)
    Nvec /= np.sqrt(norm2)[:, None]
    Ncov = np.empty_like(Nvec)
    Ncov[:, :n] = np.einsum("mij,mj->mi", sigma, Nvec[:, :n])
    Ncov[:, n] = lam * Nvec[:, n]

    b = np.einsum("mija,ma->mij", DE, Ncov)
    g_ind = sigma + lam[:, None, None] * np.einsum("mi,mj->mij", g, g)
    det = np.linalg.det(g_ind)
    if np.any(det <= 0):
        raise ValueError("degenerate induced metric (not a graph state)")
    shape_trace = np.trace(np.linalg.solve(g_ind, b), axis1=-2, axis2=-1)
    return nodes, shape_trace / n


def mean_curvature_oracle(chart: Chart, u: GridFunction, node) -> float:
    """Oracle H of Gr(u) at one interior node (trace of the shape operator / n)."""
    node = tuple(node)
    grid = u.grid
    if grid.mask[node] != INTERIOR or not _wide_stencil_ok(grid)[node]:
        raise ValueError(f"node {node} is not interior with the oracle's full stencil")
    _, H = oracle_field(chart, u, [node])
    return float(H[0])


def oracle_deviation(problem, u: GridFunction) -> float:
    """Sup over interior nodes of |oracle H - prescribed H|."""
    nodes, H = oracle_field(problem.chart, u)
    idx = tuple(nodes.T)
    return float(np.max(np.abs(H - problem.H[idx])))


@dataclass
class ComparisonCertificate:
    passed: bool
    max_violation: float
    location: tuple
    tolerance: float

    def to_json(self):
        return {
            "passed": bool(self.passed),
            "max_violation": float(self.max_violation),
            "location": [int(i) for i in self.location],
            "tolerance": float(self.tolerance),
        }


def comparison_check(u1: GridFunction, u2: GridFunction,
                     tolerance: float = 1e-8) -> ComparisonCertificate:
    """Certify the discrete comparison u1 <= u2 + tolerance at every node."""
    if u1.grid is not u2.grid and u1.grid.shape != u2.grid.shape:
        raise ValueError("comparison requires a common grid")
    d = u1.grid.mask == DIRICHLET
    if np.any(u1.values[d] > u2.values[d] + 1e-11):
        raise ValueError("boundary values are not ordered: u1 > u2 on Dirichlet nodes")
    diff = u1.values - u2.values
    loc = np.unravel_index(np.argmax(diff), diff.shape)
    worst = max(0.0, float(diff[loc]))
    return ComparisonCertificate(worst <= tolerance, worst, loc, tolerance)


@dataclass
class GradientBoundCertificate:
    u0: float
    r: float
    gamma0: float
    gamma1: float
    C1: float
    D: float
    C2: float
    W: float
    w_o: Optional[float] = None
    within_bound: Optional[bool] = None

    def to_json(self):
        out = {"u0": self.u0, "r": self.r, "gamma0": self.gamma0,
               "gamma1": self.gamma1, "C1": self.C1, "D": self.D,
               "C2": self.C2, "W": self.W}
        if self.w_o is not None:
            out["w_o"] = self.w_o
            out["within_bound"] = bool(self.within_bound)
        return out


def certificate_from_values(u0: float, r: float, gamma0: float, gamma1: float,
                            C1: float, w_o: float | None = None) -> GradientBoundCertificate:
    """Certificate constants from their closed forms (the arithmetic core)."""
    if u0 <= 0 or r <= 0 or gamma0 <= 0 or gamma1 < gamma0 or C1 <= 0:
        raise ValueError("certificate inputs must satisfy u0, r, gamma0, C1 > 0 "
                         "and gamma1 >= gamma0")
    D = 32.0 * gamma0 / (r**2 * gamma0 + 256.0 * u0**2)
    C2 = gamma1 + 16.0 * u0 / r
    W = C2 * math.exp(C1) / (math.exp(C1 / 2.0) - 1.0)
    return GradientBoundCertificate(
        u0=u0, r=r, gamma0=gamma0, gamma1=gamma1, C1=C1, D=D, C2=C2, W=W,
        w_o=w_o, within_bound=None if w_o is None else (w_o <= W),
    )


def gradient_norm_at(u: GridFunction, node) -> float:
    """Metric norm of the discrete gradient at an interior or pole node."""
    grid = u.grid
    node = tuple(node)
    if grid.mask[node] == POLE:
        return float(np.hypot(*pole_gradient(u)))
    from .mesh import _partials_at

    g = _partials_at(u, node)
    sinv = grid.chart.metric_inv(grid.node_coords(node))
    return float(np.sqrt(g @ sinv @ g))


def certificate_evaluate(u: GridFunction, o, r: float, C1: float,
                         auto_shift: bool = True) -> GradientBoundCertificate:
    """Evaluate the gradient-bound certificate for u at the center node o.

    With ``auto_shift`` the state is translated down by sup u + 1, which is
    exact by the vertical invariance of the operator and realizes the
    negative-solution hypothesis; otherwise u(o) < 0 is required.
    """
    grid = u.grid
    o = tuple(o)
    chart = grid.chart
    vals = u.values
    if auto_shift:
        vals = vals - (float(np.max(vals)) + 1.0)
    if vals[o] >= 0:
        raise ValueError("u(o) must be negative (enable auto_shift or shift first)")
    x_o = grid.node_coords(o)
    pts = grid.points()
    dist = chart.geodesic_distance(pts, x_o)
    d_mask = grid.mask == DIRICHLET
    if np.any(d_mask) and float(np.min(dist[d_mask])) < r:
        raise ValueError(f"ball of radius {r} about {o} exits the grid")
    ball = dist <= r
    gam = chart.gamma(pts[ball])
    u0 = -float(vals[o])
    grad_norm = gradient_norm_at(u, o)
    gamma_o = float(chart.gamma(x_o))
    w_o = math.sqrt(gamma_o + grad_norm**2)
    return certificate_from_values(
        u0, r, float(np.min(gam)), float(np.max(gam)), C1, w_o=w_o
    )
