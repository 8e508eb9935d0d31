"""Numba-compiled assembly kernels (the default hot path).

Same arithmetic as ``numpy_backend``, written as per-node loops.  Kernels
are cached to disk, so the compile cost is paid once per interpreter/ABI.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# offset table mirrored from numpy_backend.OFFSETS
_DI = np.array([0, 1, -1, 0, 0, 1, 1, -1, -1], dtype=np.int64)
_DJ = np.array([0, 0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)


@njit(cache=True)
def _residual_kernel(u, gamma, dgc, sinv, Gam, H, mask, h0, h1, n, out):
    N0, N1 = u.shape
    for i in range(N0):
        for j in range(N1):
            if mask[i, j] != 0:
                continue
            ip = (i + 1) % N0
            im = (i - 1) % N0
            jp = (j + 1) % N1
            jm = (j - 1) % N1
            g0 = (u[ip, j] - u[im, j]) / (2 * h0)
            g1 = (u[i, jp] - u[i, jm]) / (2 * h1)
            s00 = (u[ip, j] - 2 * u[i, j] + u[im, j]) / (h0 * h0)
            s11 = (u[i, jp] - 2 * u[i, j] + u[i, jm]) / (h1 * h1)
            s01 = (u[ip, jp] - u[ip, jm] - u[im, jp] + u[im, jm]) / (4 * h0 * h1)
            Hc00 = s00 - Gam[i, j, 0, 0, 0] * g0 - Gam[i, j, 1, 0, 0] * g1
            Hc01 = s01 - Gam[i, j, 0, 0, 1] * g0 - Gam[i, j, 1, 0, 1] * g1
            Hc11 = s11 - Gam[i, j, 0, 1, 1] * g0 - Gam[i, j, 1, 1, 1] * g1
            u0 = sinv[i, j, 0, 0] * g0 + sinv[i, j, 0, 1] * g1
            u1 = sinv[i, j, 1, 0] * g0 + sinv[i, j, 1, 1] * g1
            w2 = gamma[i, j] + g0 * u0 + g1 * u1
            w = np.sqrt(w2)
            a00 = sinv[i, j, 0, 0] - u0 * u0 / w2
            a01 = sinv[i, j, 0, 1] - u0 * u1 / w2
            a11 = sinv[i, j, 1, 1] - u1 * u1 / w2
            R = (gamma[i, j] + w2) / (2 * gamma[i, j] * w2)
            gg = dgc[i, j, 0] * g0 + dgc[i, j, 1] * g1
            out[i, j] = (
                a00 * Hc00 + 2 * a01 * Hc01 + a11 * Hc11 - R * gg - n * H[i, j] * w
            )


@njit(cache=True)
def _jacobian_kernel(u, gamma, dgc, sinv, Gam, H, mask, slot, h0, h1, n,
                     di, dj, rows, cols, vals):
    N0, N1 = u.shape
    p = 0
    for i in range(N0):
        for j in range(N1):
            if mask[i, j] != 0:
                continue
            ip = (i + 1) % N0
            im = (i - 1) % N0
            jp = (j + 1) % N1
            jm = (j - 1) % N1
            g0 = (u[ip, j] - u[im, j]) / (2 * h0)
            g1 = (u[i, jp] - u[i, jm]) / (2 * h1)
            s00 = (u[ip, j] - 2 * u[i, j] + u[im, j]) / (h0 * h0)
            s11 = (u[i, jp] - 2 * u[i, j] + u[i, jm]) / (h1 * h1)
            s01 = (u[ip, jp] - u[ip, jm] - u[im, jp] + u[im, jm]) / (4 * h0 * h1)
            Hc00 = s00 - Gam[i, j, 0, 0, 0] * g0 - Gam[i, j, 1, 0, 0] * g1
            Hc01 = s01 - Gam[i, j, 0, 0, 1] * g0 - Gam[i, j, 1, 0, 1] * g1
            Hc11 = s11 - Gam[i, j, 0, 1, 1] * g0 - Gam[i, j, 1, 1, 1] * g1
            u0 = sinv[i, j, 0, 0] * g0 + sinv[i, j, 0, 1] * g1
            u1 = sinv[i, j, 1, 0] * g0 + sinv[i, j, 1, 1] * g1
            w2 = gamma[i, j] + g0 * u0 + g1 * u1
            w = np.sqrt(w2)
            w4 = w2 * w2
            a00 = sinv[i, j, 0, 0] - u0 * u0 / w2
            a01 = sinv[i, j, 0, 1] - u0 * u1 / w2
            a11 = sinv[i, j, 1, 1] - u1 * u1 / w2
            R = (gamma[i, j] + w2) / (2 * gamma[i, j] * w2)
            gg = dgc[i, j, 0] * g0 + dgc[i, j, 1] * g1

            Hcu0 = Hc00 * u0 + Hc01 * u1
            Hcu1 = Hc01 * u0 + Hc11 * u1
            uHcu = u0 * Hcu0 + u1 * Hcu1
            sHcu0 = sinv[i, j, 0, 0] * Hcu0 + sinv[i, j, 0, 1] * Hcu1
            sHcu1 = sinv[i, j, 1, 0] * Hcu0 + sinv[i, j, 1, 1] * Hcu1
            dA0 = (-2 * sHcu0 + 2 * u0 * uHcu / w2) / w2
            dA1 = (-2 * sHcu1 + 2 * u1 * uHcu / w2) / w2
            GamA0 = (a00 * Gam[i, j, 0, 0, 0] + 2 * a01 * Gam[i, j, 0, 0, 1]
                     + a11 * Gam[i, j, 0, 1, 1])
            GamA1 = (a00 * Gam[i, j, 1, 0, 0] + 2 * a01 * Gam[i, j, 1, 0, 1]
                     + a11 * Gam[i, j, 1, 1, 1])
            dFdg0 = dA0 - GamA0 + u0 * gg / w4 - R * dgc[i, j, 0] - n * H[i, j] * u0 / w
            dFdg1 = dA1 - GamA1 + u1 * gg / w4 - R * dgc[i, j, 1] - n * H[i, j] * u1 / w

            rows[p] = slot[i, j]
            vals[p, 0] = -2 * a00 / (h0 * h0) - 2 * a11 / (h1 * h1)
            vals[p, 1] = a00 / (h0 * h0) + dFdg0 / (2 * h0)
            vals[p, 2] = a00 / (h0 * h0) - dFdg0 / (2 * h0)
            vals[p, 3] = a11 / (h1 * h1) + dFdg1 / (2 * h1)
            vals[p, 4] = a11 / (h1 * h1) - dFdg1 / (2 * h1)
            c = a01 / (2 * h0 * h1)
            vals[p, 5] = c
            vals[p, 6] = -c
            vals[p, 7] = -c
            vals[p, 8] = c
            for k in range(9):
                cols[p, k] = slot[(i + di[k]) % N0, (j + dj[k]) % N1]
            p += 1


def bulk_residual(u, T):
    out = np.zeros_like(u)
    _residual_kernel(u, T.gamma, T.dgc, T.sinv, T.Gam, T.H, T.mask,
                     T.h0, T.h1, float(T.n), out)
    return out


def bulk_jacobian(u, T):
    n_int = int(np.count_nonzero(T.mask == 0))
    rows = np.empty(n_int, dtype=np.int64)
    cols = np.empty((n_int, 9), dtype=np.int64)
    vals = np.empty((n_int, 9))
    _jacobian_kernel(u, T.gamma, T.dgc, T.sinv, T.Gam, T.H, T.mask, T.slot,
                     T.h0, T.h1, float(T.n), _DI, _DJ, rows, cols, vals)
    return rows, cols, vals
