"""Vectorized numpy assembly of the mean curvature residual and Jacobian.

This is the fallback path (and the reference for the numba kernels; the two
must agree to roundoff).  All shifts are plain ``np.roll``: periodic axes
genuinely wrap, and on non-periodic axes the wrapped entries only ever land
in boundary rows whose values are never consumed.
"""

from __future__ import annotations

import numpy as np

from ..mesh import INTERIOR
from .tables import Tables

# stencil offsets shared with the numba backend and the COO assembly
OFFSETS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


def _shift(u, di, dj):
    v = u
    if di:
        v = np.roll(v, -di, axis=0)
    if dj:
        v = np.roll(v, -dj, axis=1)
    return v


def _intermediates(u: np.ndarray, T: Tables):
    h0, h1 = T.h0, T.h1
    up0, um0 = _shift(u, 1, 0), _shift(u, -1, 0)
    up1, um1 = _shift(u, 0, 1), _shift(u, 0, -1)
    upp, upm = _shift(u, 1, 1), _shift(u, 1, -1)
    ump, umm = _shift(u, -1, 1), _shift(u, -1, -1)

    g0 = (up0 - um0) / (2 * h0)
    g1 = (up1 - um1) / (2 * h1)
    s00 = (up0 - 2 * u + um0) / h0**2
    s11 = (up1 - 2 * u + um1) / h1**2
    s01 = (upp - upm - ump + umm) / (4 * h0 * h1)

    Hc00 = s00 - T.Gam[..., 0, 0, 0] * g0 - T.Gam[..., 1, 0, 0] * g1
    Hc01 = s01 - T.Gam[..., 0, 0, 1] * g0 - T.Gam[..., 1, 0, 1] * g1
    Hc11 = s11 - T.Gam[..., 0, 1, 1] * g0 - T.Gam[..., 1, 1, 1] * g1

    u0 = T.sinv[..., 0, 0] * g0 + T.sinv[..., 0, 1] * g1
    u1 = T.sinv[..., 1, 0] * g0 + T.sinv[..., 1, 1] * g1
    w2 = T.gamma + g0 * u0 + g1 * u1
    w = np.sqrt(w2)
    a00 = T.sinv[..., 0, 0] - u0 * u0 / w2
    a01 = T.sinv[..., 0, 1] - u0 * u1 / w2
    a11 = T.sinv[..., 1, 1] - u1 * u1 / w2
    R = (T.gamma + w2) / (2 * T.gamma * w2)
    gg = T.dgc[..., 0] * g0 + T.dgc[..., 1] * g1
    return g0, g1, Hc00, Hc01, Hc11, u0, u1, w2, w, a00, a01, a11, R, gg


def bulk_residual(u: np.ndarray, T: Tables) -> np.ndarray:
    """Full-grid residual array; only interior entries are meaningful."""
    (_, _, Hc00, Hc01, Hc11, _, _, _, w, a00, a01, a11, R, gg) = _intermediates(u, T)
    return a00 * Hc00 + 2 * a01 * Hc01 + a11 * Hc11 - R * gg - T.n * T.H * w


def bulk_jacobian(u: np.ndarray, T: Tables):
    """COO pieces for interior rows: (row slots, neighbor cols, values).

    cols/vals have one column per entry of OFFSETS; Dirichlet neighbors get
    col -1 and are filtered by the caller.
    """
    (g0, g1, Hc00, Hc01, Hc11, u0, u1, w2, w, a00, a01, a11, R, gg) = _intermediates(u, T)
    h0, h1 = T.h0, T.h1
    n = T.n
    w4 = w2 * w2

    Hcu0 = Hc00 * u0 + Hc01 * u1
    Hcu1 = Hc01 * u0 + Hc11 * u1
    uHcu = u0 * Hcu0 + u1 * Hcu1
    sHcu0 = T.sinv[..., 0, 0] * Hcu0 + T.sinv[..., 0, 1] * Hcu1
    sHcu1 = T.sinv[..., 1, 0] * Hcu0 + T.sinv[..., 1, 1] * Hcu1
    dA0 = (-2 * sHcu0 + 2 * u0 * uHcu / w2) / w2
    dA1 = (-2 * sHcu1 + 2 * u1 * uHcu / w2) / w2
    GamA0 = a00 * T.Gam[..., 0, 0, 0] + 2 * a01 * T.Gam[..., 0, 0, 1] + a11 * T.Gam[..., 0, 1, 1]
    GamA1 = a00 * T.Gam[..., 1, 0, 0] + 2 * a01 * T.Gam[..., 1, 0, 1] + a11 * T.Gam[..., 1, 1, 1]
    dFdg0 = dA0 - GamA0 + u0 * gg / w4 - R * T.dgc[..., 0] - n * T.H * u0 / w
    dFdg1 = dA1 - GamA1 + u1 * gg / w4 - R * T.dgc[..., 1] - n * T.H * u1 / w

    I, J = np.nonzero(T.mask == INTERIOR)
    rows = T.slot[I, J]
    N0, N1 = T.mask.shape
    coeffs = {
        (0, 0): -2 * a00 / h0**2 - 2 * a11 / h1**2,
        (1, 0): a00 / h0**2 + dFdg0 / (2 * h0),
        (-1, 0): a00 / h0**2 - dFdg0 / (2 * h0),
        (0, 1): a11 / h1**2 + dFdg1 / (2 * h1),
        (0, -1): a11 / h1**2 - dFdg1 / (2 * h1),
        (1, 1): a01 / (2 * h0 * h1),
        (1, -1): -a01 / (2 * h0 * h1),
        (-1, 1): -a01 / (2 * h0 * h1),
        (-1, -1): a01 / (2 * h0 * h1),
    }
    cols = np.empty((rows.size, len(OFFSETS)), dtype=np.int64)
    vals = np.empty((rows.size, len(OFFSETS)))
    for k, (di, dj) in enumerate(OFFSETS):
        cols[:, k] = T.slot[(I + di) % N0, (J + dj) % N1]
        vals[:, k] = coeffs[(di, dj)][I, J]
    return rows, cols, vals


def bulk_linear_residual(u: np.ndarray, T: Tables) -> np.ndarray:
    """Linearization of the residual at the zero state, applied to u.

    sigma^{ij} u_{i;j} - (1/gamma) <grad gamma, grad u> - n H sqrt(gamma):
    the coefficients of the full residual frozen at grad u = 0 (where
    a = sigma^{-1}, R = 1/gamma, w = sqrt(gamma)).  Used for the
    harmonic-like boundary extension; exactly equivariant under constant
    shifts of the data.
    """
    h0, h1 = T.h0, T.h1
    up0, um0 = _shift(u, 1, 0), _shift(u, -1, 0)
    up1, um1 = _shift(u, 0, 1), _shift(u, 0, -1)
    upp, upm = _shift(u, 1, 1), _shift(u, 1, -1)
    ump, umm = _shift(u, -1, 1), _shift(u, -1, -1)
    g0 = (up0 - um0) / (2 * h0)
    g1 = (up1 - um1) / (2 * h1)
    s00 = (up0 - 2 * u + um0) / h0**2
    s11 = (up1 - 2 * u + um1) / h1**2
    s01 = (upp - upm - ump + umm) / (4 * h0 * h1)
    Hc00 = s00 - T.Gam[..., 0, 0, 0] * g0 - T.Gam[..., 1, 0, 0] * g1
    Hc01 = s01 - T.Gam[..., 0, 0, 1] * g0 - T.Gam[..., 1, 0, 1] * g1
    Hc11 = s11 - T.Gam[..., 0, 1, 1] * g0 - T.Gam[..., 1, 1, 1] * g1
    gg = T.dgc[..., 0] * g0 + T.dgc[..., 1] * g1
    return (T.sinv[..., 0, 0] * Hc00 + 2 * T.sinv[..., 0, 1] * Hc01
            + T.sinv[..., 1, 1] * Hc11 - gg / T.gamma
            - T.n * T.H * np.sqrt(T.gamma))


def gradient_tables(u: np.ndarray, T: Tables):
    """Covariant partials and squared metric norm of the gradient (bulk)."""
    h0, h1 = T.h0, T.h1
    g0 = (_shift(u, 1, 0) - _shift(u, -1, 0)) / (2 * h0)
    g1 = (_shift(u, 0, 1) - _shift(u, 0, -1)) / (2 * h1)
    u0 = T.sinv[..., 0, 0] * g0 + T.sinv[..., 0, 1] * g1
    u1 = T.sinv[..., 1, 0] * g0 + T.sinv[..., 1, 1] * g1
    return g0, g1, g0 * u0 + g1 * u1
