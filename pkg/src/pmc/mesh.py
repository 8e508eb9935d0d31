"""Structured grids on chart coordinate boxes and nodal scalar fields.

Grids are tensor products of uniform 1D axes.  Non-periodic axes carry one
Dirichlet layer at each end; periodic axes wrap by index.  Two extensions of
the plain box are supported:

* ``disc_radius`` on flat charts marks every node with |x| >= R as Dirichlet,
  embedding a disc domain in the box (boundary values are imposed at the
  masked nodes themselves, so no interpolation to the true circle occurs).
* Polar charts built with ``axis_patch`` carry the pole as row 0 of the
  radial axis.  The pole is a single unknown; the stored value array keeps
  row 0 constant (the value replicated over all angles), which makes every
  centered stencil at the first ring see the pole as its inner neighbor.

Derivative stencils are second-order central differences; the covariant
Hessian subtracts the Christoffel correction evaluated at the node.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Chart, ChartError

__all__ = [
    "INTERIOR",
    "DIRICHLET",
    "POLE",
    "Grid",
    "GridFunction",
    "make_grid",
    "gradient",
    "covariant_hessian",
    "interp_polar",
    "pole_gradient",
]

INTERIOR = 0
DIRICHLET = 1
POLE = 2

_INDEX_NAMES = "ijklmn"


class GridError(ValueError):
    """Invalid grid construction or node access."""


@dataclass
class Grid:
    """Structured grid on a chart box with a boundary classification mask."""

    chart: Chart
    shape: tuple
    spacings: np.ndarray
    periodic: tuple
    axes: list
    mask: np.ndarray
    has_pole: bool = False
    disc_radius: float | None = None
    slot: np.ndarray = field(init=False)
    n_unknowns: int = field(init=False)

    def __post_init__(self):
        slot = np.full(self.shape, -1, dtype=np.int64)
        interior = self.mask == INTERIOR
        slot[interior] = np.arange(int(interior.sum()))
        self.n_unknowns = int(interior.sum())
        if self.has_pole:
            slot[0, :] = self.n_unknowns
            self.n_unknowns += 1
        self.slot = slot

    @property
    def ndim(self):
        return len(self.shape)

    def node_coords(self, node) -> np.ndarray:
        return np.array([self.axes[a][node[a]] for a in range(self.ndim)])

    def coord_mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self) -> np.ndarray:
        """All node coordinates, shape = grid shape + (ndim,)."""
        return np.stack(self.coord_mesh(), axis=-1)

    def interior_nodes(self):
        return np.argwhere(self.mask == INTERIOR)

    def dirichlet_nodes(self):
        return np.argwhere(self.mask == DIRICHLET)


def make_grid(chart: Chart, shape, disc_radius: float | None = None) -> Grid:
    """Build a grid with the given per-axis node counts on the chart box.

    ``shape`` may be an int (applied to every axis) or a per-axis sequence.
    ``disc_radius`` (flat charts only) additionally marks nodes with
    |x| >= R as Dirichlet.
    """
    n = chart.n
    if np.isscalar(shape):
        shape = (int(shape),) * n
    shape = tuple(int(s) for s in shape)
    if len(shape) != n:
        raise GridError(f"shape {shape} does not match chart dimension {n}")
    for s, per in zip(shape, chart.periodic):
        if per and s < 4:
            raise GridError("periodic axes need at least 4 nodes")
        if not per and s < 3:
            raise GridError("non-periodic axes need at least 3 nodes")

    axes = []
    spacings = []
    for a in range(n):
        lo, hi = chart.lows[a], chart.highs[a]
        if chart.periodic[a]:
            h = (hi - lo) / shape[a]
            axes.append(lo + h * np.arange(shape[a]))
        else:
            h = (hi - lo) / (shape[a] - 1)
            axes.append(lo + h * np.arange(shape[a]))
        spacings.append(h)

    mask = np.full(shape, INTERIOR, dtype=np.int8)
    for a in range(n):
        if not chart.periodic[a]:
            lo_sl = [slice(None)] * n
            hi_sl = [slice(None)] * n
            lo_sl[a] = 0
            hi_sl[a] = shape[a] - 1
            mask[tuple(lo_sl)] = DIRICHLET
            mask[tuple(hi_sl)] = DIRICHLET

    has_pole = chart.kind == "hyperbolic_polar" and chart.axis_patch
    if has_pole:
        if n != 2:
            raise GridError("the pole patch is implemented for 2D polar grids")
        mask[0, :] = POLE

    if disc_radius is not None:
        if chart.kind not in ("euclidean", "rotational"):
            raise GridError("disc masks apply to flat charts only")
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        r2 = np.sum(pts**2, axis=-1)
        mask[r2 >= disc_radius**2 * (1 - 1e-14)] = DIRICHLET
        if not np.any(mask == INTERIOR):
            raise GridError("disc mask leaves no interior nodes")

    return Grid(chart, shape, np.asarray(spacings, dtype=float), chart.periodic,
                axes, mask, has_pole, disc_radius)


class GridFunction:
    """Nodal scalar field on a grid (values of the Killing-flow parameter)."""

    def __init__(self, grid: Grid, values=None):
        self.grid = grid
        if values is None:
            self.values = np.zeros(grid.shape)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != grid.shape:
                raise GridError(
                    f"value shape {values.shape} does not match grid {grid.shape}"
                )
            self.values = values.copy()
        if grid.has_pole:
            self.set_pole(self.values[0, 0])

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "GridFunction":
        pts = grid.points()
        vals = np.asarray(fn(pts), dtype=float)
        if vals.shape != grid.shape:
            vals = np.broadcast_to(vals, grid.shape).copy()
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values)

    @property
    def pole_value(self):
        if not self.grid.has_pole:
            raise GridError("grid has no pole")
        return self.values[0, 0]

    def set_pole(self, v: float):
        self.values[0, :] = float(v)

    def assert_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise GridError("grid function contains non-finite values")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- serialization ----------------------------------------------------

    def to_csv(self, path):
        """CSV with one row per node: indices, coordinates, value.

        Values are written with 17 significant digits so that a decimal
        round-trip is bit-exact.  Row order is row-major over the grid.
        """
        nd = self.grid.ndim
        header = (
            ",".join(_INDEX_NAMES[:nd])
            + ","
            + ",".join(f"coord{a+1}" for a in range(nd))
            + ",value"
        )
        buf = io.StringIO()
        buf.write(header + "\n")
        for idx in np.ndindex(self.grid.shape):
            coords = (self.grid.axes[a][idx[a]] for a in range(nd))
            buf.write(
                ",".join(str(i) for i in idx)
                + ","
                + ",".join("%.17g" % c for c in coords)
                + ","
                + "%.17g" % self.values[idx]
                + "\n"
            )
        with open(path, "w") as f:
            f.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "GridFunction":
        nd = grid.ndim
        vals = np.empty(grid.shape)
        with open(path) as f:
            header = f.readline()
            ncols = len(header.strip().split(","))
            if ncols != 2 * nd + 1:
                raise GridError(f"CSV has {ncols} columns, expected {2*nd + 1}")
            for line in f:
                parts = line.strip().split(",")
                idx = tuple(int(p) for p in parts[:nd])
                vals[idx] = float(parts[-1])
        return cls(grid, vals)


# -- finite-difference stencils (per-node reference implementations) -------


def _partials_at(f: GridFunction, node):
    """First partial derivatives by centered differences at one node."""
    grid = f.grid
    v = f.values
    out = np.empty(grid.ndim)
    for a in range(grid.ndim):
        ip = list(node)
        im = list(node)
        ip[a] += 1
        im[a] -= 1
        if grid.periodic[a]:
            ip[a] %= grid.shape[a]
            im[a] %= grid.shape[a]
        out[a] = (v[tuple(ip)] - v[tuple(im)]) / (2 * grid.spacings[a])
    return out


def _second_partials_at(f: GridFunction, node):
    grid = f.grid
    v = f.values
    nd = grid.ndim
    out = np.empty((nd, nd))
    for a in range(nd):
        ip = list(node)
        im = list(node)
        ip[a] += 1
        im[a] -= 1
        if grid.periodic[a]:
            ip[a] %= grid.shape[a]
            im[a] %= grid.shape[a]
        out[a, a] = (
            v[tuple(ip)] - 2 * v[tuple(node)] + v[tuple(im)]
        ) / grid.spacings[a] ** 2
        for b in range(a + 1, nd):
            val = 0.0
            for sa, sb, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                q = list(node)
                q[a] += sa
                q[b] += sb
                if grid.periodic[a]:
                    q[a] %= grid.shape[a]
                if grid.periodic[b]:
                    q[b] %= grid.shape[b]
                val += sign * v[tuple(q)]
            out[a, b] = out[b, a] = val / (4 * grid.spacings[a] * grid.spacings[b])
    return out


def interp_polar(u: GridFunction, rho, theta):
    """Bilinear interpolation on a pole-patch polar grid (theta periodic)."""
    grid = u.grid
    if not grid.has_pole:
        raise GridError("interp_polar expects a pole-patch grid")
    h0, h1 = grid.spacings
    N0, N1 = grid.shape
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    fi = np.clip(rho / h0, 0.0, N0 - 1 - 1e-12)
    i0 = fi.astype(int)
    fr = fi - i0
    ft = np.mod(theta, 2 * np.pi) / h1
    j0 = ft.astype(int) % N1
    fj = ft - np.floor(ft)
    j1 = (j0 + 1) % N1
    v = u.values
    return ((1 - fr) * (1 - fj) * v[i0, j0] + (1 - fr) * fj * v[i0, j1]
            + fr * (1 - fj) * v[i0 + 1, j0] + fr * fj * v[i0 + 1, j1])


def pole_gradient(f: GridFunction) -> np.ndarray:
    """Gradient at the pole in the Cartesian patch frame (2D polar grids).

    Projects the first ring onto the first Fourier modes; second-order
    accurate since the odd part of u through the pole cancels.
    """
    grid = f.grid
    if not grid.has_pole:
        raise GridError("grid has no pole")
    h = grid.spacings[0]
    theta = grid.axes[1]
    ring = f.values[1, :]
    gx = 2.0 * np.mean(ring * np.cos(theta)) / h
    gy = 2.0 * np.mean(ring * np.sin(theta)) / h
    return np.array([gx, gy])


def gradient(f: GridFunction, node) -> np.ndarray:
    """Contravariant gradient of f at an interior or pole node.

    Central second-order differences raised with the inverse metric; at the
    pole the one-sided Fourier stencil over the first ring is used and the
    components refer to the Cartesian patch frame (where the metric is the
    identity).
    """
    node = tuple(node)
    grid = f.grid
    code = grid.mask[node]
    if code == DIRICHLET:
        raise GridError(f"node {node} is a Dirichlet boundary node")
    if code == POLE:
        return pole_gradient(f)
    g = _partials_at(f, node)
    sinv = grid.chart.metric_inv(grid.node_coords(node))
    return sinv @ g


def covariant_hessian(f: GridFunction, node) -> np.ndarray:
    """Covariant Hessian u_{i;j} = d_i d_j u - Gamma^k_ij d_k u at a node."""
    node = tuple(node)
    grid = f.grid
    if grid.mask[node] != INTERIOR:
        raise GridError(f"node {node} is not interior")
    second = _second_partials_at(f, node)
    first = _partials_at(f, node)
    G = grid.chart.christoffel(grid.node_coords(node))
    return second - np.einsum("kij,k->ij", G, first)
