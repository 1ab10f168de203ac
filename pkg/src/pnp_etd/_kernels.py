"""Compiled five-point stencil kernels.

Coefficient arrays follow the layout of :class:`pnp_etd.operator.SlotboomOperator`:
``east[i, j]`` multiplies ``u[i+1, j]``, ``west`` multiplies ``u[i-1, j]``,
``north`` multiplies ``u[i, j+1]`` and ``south`` multiplies ``u[i, j-1]``, all
with periodic wraparound.
"""

import numba as nb
import numpy as np

_jit = {"nogil": True, "cache": True}


@nb.njit(**_jit)
def stencil_apply(diag, east, west, north, south, u, out):
    nx, ny = u.shape
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i > 0 else nx - 1
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            jm = j - 1 if j > 0 else ny - 1
            out[i, j] = (diag[i, j] * u[i, j]
                         + east[i, j] * u[ip, j] + west[i, j] * u[im, j]
                         + north[i, j] * u[i, jp] + south[i, j] * u[i, jm])
    return out


@nb.njit(**_jit)
def uniformization_sum(diag, east, west, north, south, v, weights):
    """Return ``sum_k weights[k] * P^k v`` for the stencil ``P``.

    All coefficients and weights are expected to be nonnegative, so every
    partial sum is a nonnegative combination of the entries of ``v``.
    """
    nx, ny = v.shape
    cur = v.copy()
    nxt = np.empty_like(v)
    acc = weights[0] * v
    for k in range(1, weights.size):
        wk = weights[k]
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            im = i - 1 if i > 0 else nx - 1
            for j in range(ny):
                jp = j + 1 if j + 1 < ny else 0
                jm = j - 1 if j > 0 else ny - 1
                x = (diag[i, j] * cur[i, j]
                     + east[i, j] * cur[ip, j] + west[i, j] * cur[im, j]
                     + north[i, j] * cur[i, jp] + south[i, j] * cur[i, jm])
                nxt[i, j] = x
                acc[i, j] += wk * x
        cur, nxt = nxt, cur
    return acc
