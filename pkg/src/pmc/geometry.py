"""Analytic Riemannian chart data for Killing-graph problems.

A chart packages everything the discretization needs from the ambient
geometry: the metric sigma_ij on the base manifold M^n, its inverse, the
Christoffel symbols, and the warping function gamma = 1/<Y,Y> of the Killing
field Y together with its contravariant gradient.  All evaluators are
closed-form and broadcast over leading point axes (input shape (..., n)).

Supported geometries:

* ``euclidean``        -- flat R^n, gamma = 1 (product ambient space).
* ``hyperbolic_polar`` -- geodesic polar coordinates (rho, theta[, phi]) on
  H^n with n in {2, 3}; gamma = 1/cosh^2(rho).  The pole rho = 0 is excluded
  from the coordinate box unless the ``axis_patch`` flag is set, in which
  case a Cartesian-style patch represents the pole as a single point.
* ``rotational``       -- flat half-space chart with gamma = 1/dist(x, axis)^2
  where the axis is the zero set of the last coordinate; the geometry of a
  rotational Killing field about a codimension-two axis.

Sign conventions: primes in curvature formulas are derivatives along the
inward boundary distance d = rho_k - rho, so the flow-line curvature is
kappa = gamma'/(2 gamma) = tanh(rho) >= 0.  The Killing identity
grad_bar_Y Y = grad(gamma) / (2 gamma^2) is recorded here for reference but
never evaluated: the coordinate form of the mean curvature operator is
closed in (sigma, Gamma, gamma, grad gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh

__all__ = [
    "Chart",
    "ChartError",
    "CylinderCurvature",
    "make_chart",
    "flow_line_curvature",
    "cylinder_mean_curvature",
    "cylinder_curvature",
    "ricci_lower_bound_probe",
    "validate_chart",
]

EPS_POLE_DEFAULT = 1e-3


class ChartError(ValueError):
    """Invalid chart kind or parameters."""


@dataclass(frozen=True)
class Chart:
    """Closed-form chart evaluators on a coordinate box.

    Evaluators accept points of shape (..., n) and broadcast: ``metric``
    returns (..., n, n), ``christoffel`` returns (..., n, n, n) indexed as
    Gamma[k, i, j], ``gamma`` returns (...,), ``grad_gamma`` returns
    (..., n) contravariant components.
    """

    kind: str
    n: int
    lows: np.ndarray
    highs: np.ndarray
    periodic: tuple
    coord_names: tuple
    metric: Callable
    metric_inv: Callable
    christoffel: Callable
    gamma: Callable
    grad_gamma: Callable
    axis_patch: bool = False

    def point(self, *coords) -> np.ndarray:
        return np.asarray(coords, dtype=float)

    def geodesic_distance(self, x, y):
        """Geodesic distance between chart points (closed form per kind)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind in ("euclidean", "rotational"):
            return np.linalg.norm(x - y, axis=-1)
        if self.kind == "hyperbolic_polar":
            r1, r2 = x[..., 0], y[..., 0]
            if self.n == 2:
                cosang = np.cos(x[..., 1] - y[..., 1])
            else:
                t1, t2 = x[..., 1], y[..., 1]
                cosang = np.cos(t1) * np.cos(t2) + np.sin(t1) * np.sin(t2) * np.cos(
                    x[..., 2] - y[..., 2]
                )
            c = np.cosh(r1) * np.cosh(r2) - np.sinh(r1) * np.sinh(r2) * cosang
            return np.arccosh(np.maximum(c, 1.0))
        raise ChartError(f"no distance formula for chart kind {self.kind!r}")


@dataclass(frozen=True)
class CylinderCurvature:
    """Inward mean curvature of the Killing cylinder over a boundary sphere."""

    evaluate: Callable
    domain: str


def _euclidean_evaluators(n):
    eye = np.eye(n)

    def metric(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (n, n, n))

    def gamma(x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1])

    def grad_gamma(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (n,))

    return metric, metric, christoffel, gamma, grad_gamma


def _hyperbolic_evaluators(n):
    def metric(x):
        x = np.asarray(x, dtype=float)
        rho = x[..., 0]
        g = np.zeros(x.shape[:-1] + (n, n))
        g[..., 0, 0] = 1.0
        sh2 = np.sinh(rho) ** 2
        g[..., 1, 1] = sh2
        if n == 3:
            g[..., 2, 2] = sh2 * np.sin(x[..., 1]) ** 2
        return g

    def metric_inv(x):
        x = np.asarray(x, dtype=float)
        rho = x[..., 0]
        g = np.zeros(x.shape[:-1] + (n, n))
        g[..., 0, 0] = 1.0
        sh2 = np.sinh(rho) ** 2
        g[..., 1, 1] = 1.0 / sh2
        if n == 3:
            g[..., 2, 2] = 1.0 / (sh2 * np.sin(x[..., 1]) ** 2)
        return g

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        rho = x[..., 0]
        G = np.zeros(x.shape[:-1] + (n, n, n))
        sh, ch = np.sinh(rho), np.cosh(rho)
        coth = ch / sh
        G[..., 0, 1, 1] = -sh * ch
        G[..., 1, 0, 1] = coth
        G[..., 1, 1, 0] = coth
        if n == 3:
            th = x[..., 1]
            st, ct = np.sin(th), np.cos(th)
            G[..., 0, 2, 2] = -sh * ch * st**2
            G[..., 1, 2, 2] = -st * ct
            G[..., 2, 0, 2] = coth
            G[..., 2, 2, 0] = coth
            G[..., 2, 1, 2] = ct / st
            G[..., 2, 2, 1] = ct / st
        return G

    def gamma(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / np.cosh(x[..., 0]) ** 2

    def grad_gamma(x):
        x = np.asarray(x, dtype=float)
        rho = x[..., 0]
        out = np.zeros(x.shape[:-1] + (n,))
        # d(gamma)/d(rho), raised with sigma^{rho rho} = 1.
        out[..., 0] = -2.0 * np.tanh(rho) / np.cosh(rho) ** 2
        return out

    return metric, metric_inv, christoffel, gamma, grad_gamma


def _rotational_evaluators(n):
    eye = np.eye(n)

    def metric(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    def christoffel(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (n, n, n))

    def gamma(x):
        x = np.asarray(x, dtype=float)
        return x[..., -1] ** -2.0

    def grad_gamma(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (n,))
        out[..., -1] = -2.0 * x[..., -1] ** -3.0
        return out

    return metric, metric, christoffel, gamma, grad_gamma


def make_chart(kind: str, n: int, parameters: dict | None = None, **kwargs) -> Chart:
    """Build a chart of the given kind.

    Parameters by kind:

    * euclidean: ``bounds`` -- per-axis [lo, hi], default [-1, 1]^n.
    * hyperbolic_polar: ``rho_max`` (required), ``rho_min`` (default 1e-3),
      ``axis_patch`` (default False; forces rho_min = 0), for n = 3 also
      ``theta_bounds`` away from the angular axis.
    * rotational: ``bounds`` with last-axis lower bound > 0 (distance to the
      rotation axis), default [-1, 1]^(n-1) x [0.5, 1.5].
    """
    params = dict(parameters or {})
    params.update(kwargs)
    if n < 1:
        raise ChartError(f"dimension must be >= 1, got {n}")

    if kind == "euclidean":
        bounds = np.asarray(params.pop("bounds", [[-1.0, 1.0]] * n), dtype=float)
        if bounds.shape != (n, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ChartError(f"degenerate bounds for euclidean chart: {bounds}")
        _reject_extras(params, kind)
        names = ("x", "y", "z")[:n] if n <= 3 else tuple(f"x{i+1}" for i in range(n))
        m, mi, G, g, dg = _euclidean_evaluators(n)
        return Chart(kind, n, bounds[:, 0], bounds[:, 1], (False,) * n, names,
                     m, mi, G, g, dg)

    if kind == "hyperbolic_polar":
        if n not in (2, 3):
            raise ChartError("hyperbolic_polar charts support n in {2, 3}")
        if "rho_max" not in params:
            raise ChartError("hyperbolic_polar requires parameter 'rho_max'")
        rho_max = float(params.pop("rho_max"))
        axis_patch = bool(params.pop("axis_patch", False))
        rho_min = float(params.pop("rho_min", 0.0 if axis_patch else EPS_POLE_DEFAULT))
        if axis_patch:
            rho_min = 0.0
        if rho_min < 0 or rho_max <= rho_min:
            raise ChartError(f"degenerate rho interval [{rho_min}, {rho_max}]")
        if rho_min == 0.0 and not axis_patch:
            raise ChartError(
                "rho interval touches the pole; set axis_patch=True or rho_min > 0"
            )
        if n == 2:
            lows = np.array([rho_min, 0.0])
            highs = np.array([rho_max, 2 * math.pi])
            periodic = (False, True)
            names = ("rho", "theta")
        else:
            tb = params.pop("theta_bounds", [0.15 * math.pi, 0.85 * math.pi])
            if not (0.0 < tb[0] < tb[1] < math.pi):
                raise ChartError(f"theta_bounds must lie inside (0, pi): {tb}")
            lows = np.array([rho_min, tb[0], 0.0])
            highs = np.array([rho_max, tb[1], 2 * math.pi])
            periodic = (False, False, True)
            names = ("rho", "theta", "phi")
        _reject_extras(params, kind)
        m, mi, G, g, dg = _hyperbolic_evaluators(n)
        return Chart(kind, n, lows, highs, periodic, names, m, mi, G, g, dg,
                     axis_patch=axis_patch)

    if kind == "rotational":
        default = [[-1.0, 1.0]] * (n - 1) + [[0.5, 1.5]]
        bounds = np.asarray(params.pop("bounds", default), dtype=float)
        if bounds.shape != (n, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ChartError(f"degenerate bounds for rotational chart: {bounds}")
        if bounds[-1, 0] <= 0:
            raise ChartError(
                f"rotational chart needs a positive distance to the axis, "
                f"got lower bound {bounds[-1, 0]}"
            )
        _reject_extras(params, kind)
        names = tuple(f"x{i+1}" for i in range(n))
        m, mi, G, g, dg = _rotational_evaluators(n)
        return Chart(kind, n, bounds[:, 0], bounds[:, 1], (False,) * n, names,
                     m, mi, G, g, dg)

    raise ChartError(f"unknown chart kind {kind!r}")


def _reject_extras(params, kind):
    if params:
        raise ChartError(f"unknown parameters for {kind} chart: {sorted(params)}")


def flow_line_curvature(chart: Chart, rho: float) -> float:
    """Geodesic curvature kappa = tanh(rho) of the Killing flow lines.

    Equals gamma'/(2 gamma) with the prime taken along the inward distance
    d = rho_k - rho.
    """
    if chart.kind != "hyperbolic_polar":
        raise ChartError("flow-line curvature is defined for hyperbolic_polar charts")
    if np.any(np.asarray(rho) < 0):
        raise ChartError("rho must be >= 0")
    return np.tanh(rho)


def cylinder_mean_curvature(chart: Chart, x) -> float:
    """Inward mean curvature of the Killing cylinder over a sphere through x.

    x may be a chart point or a bare radius.  Hyperbolic:
    ((n-1) coth(rho) + tanh(rho)) / n, always > 1.  Euclidean/rotational:
    (n-1)/(n rho) -- the cylinder is flat along the Killing direction.
    """
    xa = np.asarray(x, dtype=float)
    if chart.kind == "hyperbolic_polar":
        rho = xa if xa.ndim == 0 else xa[..., 0]
    elif chart.kind in ("euclidean", "rotational"):
        rho = xa if xa.ndim == 0 else np.linalg.norm(xa, axis=-1)
    else:
        raise ChartError(f"no cylinder curvature formula for kind {chart.kind!r}")
    if np.any(rho <= 0):
        raise ChartError("sphere radius must be positive")
    n = chart.n
    if chart.kind == "hyperbolic_polar":
        return ((n - 1) / np.tanh(rho) + np.tanh(rho)) / n
    return (n - 1) / (n * rho)


def cylinder_curvature(chart: Chart) -> CylinderCurvature:
    if chart.kind == "hyperbolic_polar":
        domain = "geodesic spheres rho > 0 about the pole"
    else:
        domain = "origin-centered spheres of positive radius"
    return CylinderCurvature(lambda x: cylinder_mean_curvature(chart, x), domain)


def _christoffel_fd(chart, x, h):
    """d_l Gamma^k_ij by central differences; returns [l, k, i, j]."""
    n = chart.n
    out = np.empty((n, n, n, n))
    for l in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[l] += h
        xm[l] -= h
        out[l] = (chart.christoffel(xp) - chart.christoffel(xm)) / (2 * h)
    return out


def ricci_lower_bound_probe(chart: Chart, points: Sequence, step: float = 1e-5) -> float:
    """Minimum eigenvalue of the Ricci tensor (w.r.t. the metric) over samples.

    Ricci is assembled from finite differences of the Christoffel evaluators,
    so this is an oracle independent of any closed-form curvature.  Used as a
    diagnostic for the solvability hypothesis inf Ric >= -n inf H_cyl^2;
    reported, never enforced.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ChartError("ricci probe needs a nonempty sample set")
    n = chart.n
    worst = math.inf
    for x in pts:
        G = chart.christoffel(x)
        dG = _christoffel_fd(chart, x, step)
        ric = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ric[i, j] = (
                    sum(dG[k, k, i, j] for k in range(n))
                    - sum(dG[j, k, i, k] for k in range(n))
                    + sum(G[k, k, l] * G[l, i, j] for k in range(n) for l in range(n))
                    - sum(G[k, j, l] * G[l, i, k] for k in range(n) for l in range(n))
                )
        ric = 0.5 * (ric + ric.T)
        vals = eigh(ric, chart.metric(x), eigvals_only=True)
        worst = min(worst, float(vals[0]))
    return worst


def validate_chart(chart: Chart, points, probe_step: float = 1e-6) -> dict:
    """Max deviations of the chart invariants over sample points.

    Returns a dict with keys ``min_metric_eig``, ``inverse_dev``,
    ``symmetry_dev``, ``min_gamma``, ``grad_gamma_dev`` (the last against a
    central finite difference of gamma with the given step).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = chart.n
    sig = chart.metric(pts)
    sinv = chart.metric_inv(pts)
    eigs = np.linalg.eigvalsh(sig)
    prod = np.einsum("...ij,...jk->...ik", sinv, sig)
    inverse_dev = np.max(np.abs(prod - np.eye(n)))
    G = chart.christoffel(pts)
    symmetry_dev = np.max(np.abs(G - np.swapaxes(G, -1, -2)))
    gam = chart.gamma(pts)
    dg = chart.grad_gamma(pts)
    # covariant FD gradient, raised with the inverse metric
    fd = np.zeros_like(dg)
    for a in range(n):
        e = np.zeros(n)
        e[a] = probe_step
        fd[..., a] = (chart.gamma(pts + e) - chart.gamma(pts - e)) / (2 * probe_step)
    fd_contra = np.einsum("...ab,...b->...a", sinv, fd)
    return {
        "min_metric_eig": float(np.min(eigs)),
        "inverse_dev": float(inverse_dev),
        "symmetry_dev": float(symmetry_dev),
        "min_gamma": float(np.min(gam)),
        "grad_gamma_dev": float(np.max(np.abs(dg - fd_contra))),
    }
