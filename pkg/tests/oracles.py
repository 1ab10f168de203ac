"""Dense, deliberately naive reference implementations used by the tests.

Nothing here calls into the stencil or uniformization code paths.
"""

import math

import numpy as np


def column_table_matrix(psi: np.ndarray, h: float) -> np.ndarray:
    """Dense ``A = -L[psi]`` transcribed column by column from the M-matrix entry table.

    Uses the 1-based ``[i, j] = (i-1) N + j`` numbering with periodic
    neighbours, then returns a 0-based array (same order as ``values.ravel()``).
    """
    N = psi.shape[0]

    def idx(i, j):  # 1-based (i, j) -> 0-based flat index
        return (i - 1) * N + (j - 1)

    def wrap(i):
        return (i - 1) % N + 1

    def phi(i, j):
        return psi[wrap(i) - 1, wrap(j) - 1]

    c = 2.0 / h**2
    A = np.zeros((N * N, N * N))
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            l = idx(i, j)
            here = phi(i, j)
            for (ki, kj) in ((i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j)):
                k = idx(wrap(ki), wrap(kj))
                w = 1.0 / (1.0 + math.exp(here - phi(ki, kj)))
                A[k, l] += -c * w
                A[l, l] += c * w
    return A


def laplacian_matrix(N: int, h: float) -> np.ndarray:
    M = np.zeros((N * N, N * N))
    for i in range(N):
        for j in range(N):
            l = i * N + j
            M[l, l] = -4.0 / h**2
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                M[l, ((i + di) % N) * N + (j + dj) % N] += 1.0 / h**2
    return M


def expm_taylor(A: np.ndarray) -> np.ndarray:
    """Scaling and squaring with a plain Taylor series."""
    norm = np.abs(A).sum(axis=0).max()
    s = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0)
    B = A / 2.0**s
    E = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 40):
        term = term @ B / k
        E = E + term
        if np.abs(term).max() < 1e-20:
            break
    for _ in range(s):
        E = E @ E
    return E


def poisson_dense(rhs: np.ndarray, h: float, eps: float) -> np.ndarray:
    """Minimum-norm (hence mean-zero) solution of ``-eps^2 Lap_h phi = rhs``."""
    N = rhs.shape[0]
    M = -eps**2 * laplacian_matrix(N, h)
    return (np.linalg.pinv(M) @ rhs.ravel()).reshape(N, N)


def dense_step(p_src, n_src, phi, t, h, eps, rho):
    """Exponential step of length ``t`` from ``(p_src, n_src)`` with potential frozen at ``phi``."""
    Lp = -column_table_matrix(-phi, h)
    Ln = -column_table_matrix(phi, h)
    p = (expm_taylor(t * Lp) @ p_src.ravel()).reshape(p_src.shape)
    n = (expm_taylor(t * Ln) @ n_src.ravel()).reshape(n_src.shape)
    return p, n, poisson_dense(p - n + rho, h, eps)
