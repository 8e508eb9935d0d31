"""Assembly kernels with a numba hot path and a pure-numpy fallback.

The backend is selected by the ``PMC_BACKEND`` environment variable:
``auto`` (default: numba when importable, else numpy), ``numba`` or
``numpy``.  Callers may also pass ``backend=`` explicitly.  Both paths
produce the same residual vector and sparse Jacobian up to roundoff; the
pole equation (a single row coupling the pole unknown to the first ring) is
plain numpy in either case.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from ..mesh import INTERIOR
from . import numpy_backend
from .tables import Tables, build_tables

__all__ = ["build_tables", "Tables", "resolve_backend", "assemble_residual",
           "assemble_jacobian", "gradient_norms"]

_numba_backend = None
_numba_failed = False


def _load_numba():
    global _numba_backend, _numba_failed
    if _numba_backend is None and not _numba_failed:
        try:
            from . import numba_backend
            _numba_backend = numba_backend
        except ImportError:
            _numba_failed = True
    return _numba_backend


def resolve_backend(backend: str | None = None) -> str:
    name = backend or os.environ.get("PMC_BACKEND", "auto")
    if name == "auto":
        return "numba" if _load_numba() is not None else "numpy"
    if name == "numba":
        if _load_numba() is None:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return "numba"
    if name == "numpy":
        return "numpy"
    raise ValueError(f"unknown backend {name!r} (use auto, numba or numpy)")


def _bulk(backend):
    if resolve_backend(backend) == "numba":
        return _load_numba()
    return numpy_backend


# -- pole equation ----------------------------------------------------------
#
# The pole is one unknown coupled to the first rho-ring.  A quadratic fit in
# the Cartesian patch recovers gradient and Hessian from the Fourier modes
# 0, 1, 2 of the ring, giving the full operator at the pole:
#   mode 0:  u_P + h^2 (Qxx + Qyy) / 4
#   mode 1:  h * (gx cos t + gy sin t)
#   mode 2:  h^2/4 ((Qxx - Qyy) cos 2t + 2 Qxy sin 2t)


def _pole_state(u, T: Tables):
    h = T.h0
    ct, st, c2t, s2t = T.pole_trigs
    # work with the ring relative to the pole value: the trig modes are
    # unchanged (mean cos(m t) = 0 on the uniform circle) and vertical
    # translations cancel exactly in floating point
    ring = u[1, :] - u[0, 0]
    m0 = ring.mean()
    c1 = 2.0 * (ring * ct).mean()
    s1 = 2.0 * (ring * st).mean()
    c2 = 2.0 * (ring * c2t).mean()
    s2 = 2.0 * (ring * s2t).mean()
    g0 = c1 / h
    g1 = s1 / h
    lap = 4.0 * m0 / h**2
    dq = 4.0 * c2 / h**2
    Qxy = 2.0 * s2 / h**2
    Qxx = 0.5 * (lap + dq)
    Qyy = 0.5 * (lap - dq)
    gam = T.gamma[0, 0]
    w2 = gam + g0 * g0 + g1 * g1
    w = np.sqrt(w2)
    a00 = 1.0 - g0 * g0 / w2
    a01 = -g0 * g1 / w2
    a11 = 1.0 - g1 * g1 / w2
    return g0, g1, Qxx, Qxy, Qyy, w2, w, a00, a01, a11


def pole_residual(u, T: Tables) -> float:
    g0, g1, Qxx, Qxy, Qyy, w2, w, a00, a01, a11 = _pole_state(u, T)
    return a00 * Qxx + 2 * a01 * Qxy + a11 * Qyy - T.n * T.H[0, 0] * w


def pole_jacobian(u, T: Tables):
    """(cols, vals) of the pole row: the pole slot itself plus the ring."""
    h = T.h0
    ct, st, c2t, s2t = T.pole_trigs
    m = ct.size
    g0, g1, Qxx, Qxy, Qyy, w2, w, a00, a01, a11 = _pole_state(u, T)

    # dF/d(uP): only the Laplacian mode depends on the pole value
    dF_pole = (a00 + a11) * (-2.0 / h**2)

    Qu0 = Qxx * g0 + Qxy * g1
    Qu1 = Qxy * g0 + Qyy * g1
    uQu = g0 * Qu0 + g1 * Qu1
    dA0 = (-2 * Qu0 + 2 * g0 * uQu / w2) / w2
    dA1 = (-2 * Qu1 + 2 * g1 * uQu / w2) / w2
    nH = T.n * T.H[0, 0]
    dFdg0 = dA0 - nH * g0 / w
    dFdg1 = dA1 - nH * g1 / w

    dm0 = 1.0 / m
    dc1 = 2.0 * ct / m
    ds1 = 2.0 * st / m
    dc2 = 2.0 * c2t / m
    ds2 = 2.0 * s2t / m
    dlap = 4.0 * dm0 / h**2
    ddq = 4.0 * dc2 / h**2
    dQxy = 2.0 * ds2 / h**2
    dQxx = 0.5 * (dlap + ddq)
    dQyy = 0.5 * (dlap - ddq)
    dring = (a00 * dQxx + 2 * a01 * dQxy + a11 * dQyy
             + dFdg0 * dc1 / h + dFdg1 * ds1 / h)

    pole_slot = T.n_unknowns - 1
    cols = np.concatenate(([pole_slot], T.slot[1, :]))
    vals = np.concatenate(([dF_pole], dring))
    return cols, vals


# -- public assembly --------------------------------------------------------


def assemble_residual(u: np.ndarray, T: Tables, backend: str | None = None) -> np.ndarray:
    """Residual vector over the unknowns (interior nodes, then the pole)."""
    F_grid = _bulk(backend).bulk_residual(u, T)
    out = np.empty(T.n_unknowns)
    interior = T.mask == INTERIOR
    out[T.slot[interior]] = F_grid[interior]
    if T.has_pole:
        out[T.n_unknowns - 1] = pole_residual(u, T)
    return out


def assemble_linear_residual(u: np.ndarray, T: Tables) -> np.ndarray:
    """Jacobian-at-zero operator applied to the full field u ( + H source)."""
    F_grid = numpy_backend.bulk_linear_residual(u, T)
    out = np.empty(T.n_unknowns)
    interior = T.mask == INTERIOR
    out[T.slot[interior]] = F_grid[interior]
    if T.has_pole:
        h = T.h0
        lap = 4.0 * float(np.mean(u[1, :] - u[0, 0])) / h**2
        out[T.n_unknowns - 1] = lap - T.n * T.H[0, 0] * np.sqrt(T.gamma[0, 0])
    return out


def assemble_jacobian(u: np.ndarray, T: Tables, backend: str | None = None) -> sp.csr_matrix:
    """Sparse Jacobian of the residual with respect to the unknowns."""
    rows, cols, vals = _bulk(backend).bulk_jacobian(u, T)
    rows = np.repeat(rows, cols.shape[1])
    cols = cols.ravel()
    vals = vals.ravel()
    keep = cols >= 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    if T.has_pole:
        pcols, pvals = pole_jacobian(u, T)
        rows = np.concatenate([rows, np.full(pcols.size, T.n_unknowns - 1)])
        cols = np.concatenate([cols, pcols])
        vals = np.concatenate([vals, pvals])
    J = sp.coo_matrix((vals, (rows, cols)), shape=(T.n_unknowns, T.n_unknowns))
    return J.tocsr()


def gradient_norms(u: np.ndarray, T: Tables):
    """Metric norm |grad u| at every interior node plus the pole (if any)."""
    _, _, q = numpy_backend.gradient_tables(u, T)
    norms = np.sqrt(np.maximum(q[T.mask == INTERIOR], 0.0))
    if T.has_pole:
        h = T.h0
        ct, st = T.pole_trigs[0], T.pole_trigs[1]
        ring = u[1, :]
        gx = 2.0 * (ring * ct).mean() / h
        gy = 2.0 * (ring * st).mean() / h
        norms = np.append(norms, np.hypot(gx, gy))
    return norms
