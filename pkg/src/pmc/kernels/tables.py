"""Per-node chart data tables consumed by the assembly kernels.

Charts are evaluated once per (chart, grid) pair; Newton iterations then run
on plain float64 arrays, which keeps the hot kernels free of Python
callbacks.  For pole-patch grids the pole row holds the Cartesian-patch
values (identity metric, gamma = 1, vanishing Christoffels and gamma
gradient), which is exactly what the pole equation uses.

``row_scale`` is a diagonal equilibration of the residual rows: each row is
divided by how much its leading second-order coefficients exceed the median
row.  On flat charts every row matches the median and the scale is
identically one; on polar grids it tames the 1/sinh^2(rho) blow-up of the
angular stencil near the pole, whose float64 roundoff would otherwise sit
above any tight residual tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Chart
from ..mesh import DIRICHLET, INTERIOR, POLE, Grid

__all__ = ["Tables", "build_tables"]


@dataclass
class Tables:
    n: int
    h0: float
    h1: float
    per0: bool
    per1: bool
    mask: np.ndarray
    slot: np.ndarray
    n_unknowns: int
    gamma: np.ndarray
    dgc: np.ndarray      # contravariant grad gamma, shape S + (2,)
    sigma: np.ndarray    # S + (2, 2)
    sinv: np.ndarray     # S + (2, 2)
    Gam: np.ndarray      # S + (2, 2, 2), Gamma[k, i, j]
    H: np.ndarray
    has_pole: bool
    row_scale: np.ndarray
    pole_trigs: tuple | None = None  # (cos t, sin t, cos 2t, sin 2t)


def build_tables(chart: Chart, grid: Grid, H_values: np.ndarray) -> Tables:
    if grid.ndim != 2:
        raise ValueError("assembly kernels are implemented for 2D grids")
    pts = grid.points()
    H_values = np.asarray(H_values, dtype=float)
    if H_values.shape != grid.shape:
        raise ValueError("H field shape does not match the grid")

    if grid.has_pole:
        # evaluate off-pole rows, then write the patch values at row 0
        gamma = np.empty(grid.shape)
        dgc = np.empty(grid.shape + (2,))
        sigma = np.empty(grid.shape + (2, 2))
        sinv = np.empty(grid.shape + (2, 2))
        Gam = np.empty(grid.shape + (2, 2, 2))
        body = pts[1:]
        gamma[1:] = chart.gamma(body)
        dgc[1:] = chart.grad_gamma(body)
        sigma[1:] = chart.metric(body)
        sinv[1:] = chart.metric_inv(body)
        Gam[1:] = chart.christoffel(body)
        gamma[0] = 1.0
        dgc[0] = 0.0
        sigma[0] = np.eye(2)
        sinv[0] = np.eye(2)
        Gam[0] = 0.0
    else:
        gamma = chart.gamma(pts)
        dgc = chart.grad_gamma(pts)
        sigma = chart.metric(pts)
        sinv = chart.metric_inv(pts)
        Gam = chart.christoffel(pts)

    h0, h1 = grid.spacings
    # row equilibration from the diagonal second-order coefficients
    coef = 2.0 * (sinv[..., 0, 0] / h0**2 + sinv[..., 1, 1] / h1**2)
    rows = np.empty(grid.n_unknowns)
    rows[grid.slot[grid.mask == INTERIOR]] = coef[grid.mask == INTERIOR]
    pole_trigs = None
    if grid.has_pole:
        rows[grid.n_unknowns - 1] = 2.0 * chart.n / h0**2
        theta = grid.axes[1]
        pole_trigs = (
            np.cos(theta),
            np.sin(theta),
            np.cos(2 * theta),
            np.sin(2 * theta),
        )
    med = np.median(rows)
    row_scale = np.minimum(1.0, med / rows)

    return Tables(
        n=chart.n,
        h0=float(h0),
        h1=float(h1),
        per0=bool(grid.periodic[0]),
        per1=bool(grid.periodic[1]),
        mask=grid.mask,
        slot=grid.slot,
        n_unknowns=grid.n_unknowns,
        gamma=np.ascontiguousarray(gamma),
        dgc=np.ascontiguousarray(dgc),
        sigma=np.ascontiguousarray(sigma),
        sinv=np.ascontiguousarray(sinv),
        Gam=np.ascontiguousarray(Gam),
        H=np.ascontiguousarray(H_values),
        has_pole=grid.has_pole,
        row_scale=row_scale,
        pole_trigs=pole_trigs,
    )
