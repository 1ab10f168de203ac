"""Action of ``exp(tL)`` for a Slotboom operator by uniformization.

With ``alpha`` the largest outflow rate, ``P = I + L/alpha`` is entrywise
nonnegative with unit column sums, and

    exp(tL) v = exp(-t alpha) * sum_k (t alpha)^k / k! * P^k v .

Truncating the Poisson-weighted series keeps the result a nonnegative
combination of ``v``, so positivity survives floating point exactly.  The
small mass deficit of the truncation is removed by one positive rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Field, mass
from .operator import SlotboomOperator, max_diag_magnitude


@dataclass(frozen=True)
class ExpmvConfig:
    tail_tolerance: float = 1e-14
    max_step_dimensionless: float = 500.0
    renormalize_mass: bool = True

    def __post_init__(self):
        if not 0.0 < self.tail_tolerance < 1.0:
            raise ValueError("tail_tolerance must lie in (0, 1)")
        if not self.max_step_dimensionless > 0:
            raise ValueError("max_step_dimensionless must be positive")


def _poisson_pmf(t_alpha: float, tail_tolerance: float) -> np.ndarray:
    """Poisson(t_alpha) probabilities for ``k = 0..K`` with the tail beyond ``K`` below tolerance."""
    if t_alpha == 0:
        return np.ones(1)
    # far enough out that the neglected remainder is far below any sane tolerance
    spread = math.sqrt(t_alpha + 1.0) * (10.0 + math.sqrt(2.0 * math.log(1.0 / tail_tolerance)) * 3.0)
    kmax = int(math.ceil(t_alpha + spread + 40.0))
    k = np.arange(1, kmax + 1)
    log_pmf = np.empty(kmax + 1)
    log_pmf[0] = -t_alpha
    log_pmf[1:] = -t_alpha + np.cumsum(math.log(t_alpha) - np.log(k))
    pmf = np.exp(log_pmf)
    # tail[K] = sum_{k > K} pmf[k], summed smallest-first
    tail = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    K = int(np.argmax(tail <= tail_tolerance))
    return pmf[: K + 1]


def poisson_truncation_order(t_alpha: float, tail_tolerance: float) -> int:
    """Smallest ``K`` whose Poisson(t_alpha) right tail beyond ``K`` is at most ``tail_tolerance``."""
    if t_alpha < 0:
        raise ValueError("t_alpha must be nonnegative")
    return _poisson_pmf(float(t_alpha), tail_tolerance).size - 1


def expmv(
    op: SlotboomOperator,
    v: Field,
    t: float,
    cfg: ExpmvConfig | None = None,
    *,
    allow_signed: bool = False,
) -> Field:
    """Return ``exp(t L) v``.

    Parameters
    ----------
    op : SlotboomOperator
        Generator ``L``.
    v : Field
        Input vector; must be nonnegative unless ``allow_signed``.
    t : float
        Nonnegative time.
    cfg : ExpmvConfig, optional
        Truncation, substepping and renormalization settings.
    allow_signed : bool
        Accept signed input.  No positivity guarantee then, and mass
        renormalization is skipped when the mass is not positive.
    """
    cfg = cfg or ExpmvConfig()
    if t < 0:
        raise ValueError(f"negative time {t!r}")
    if not allow_signed and np.any(v.values < 0):
        raise ValueError("expmv input must be nonnegative")
    if v.spec != op.spec:
        raise ValueError("operator and vector live on different grids")
    if t == 0:
        return v

    alpha = max_diag_magnitude(op)
    if alpha == 0:
        return v
    diag, east, west, north, south = op.arrays()
    # 1 - d/alpha >= 0 exactly: d <= alpha implies the rounded quotient is <= 1
    p_diag = 1.0 - (-diag) / alpha
    p_east, p_west = east / alpha, west / alpha
    p_north, p_south = north / alpha, south / alpha

    t_alpha = t * alpha
    n_sub = max(1, math.ceil(t_alpha / cfg.max_step_dimensionless))
    weights = _poisson_pmf(t_alpha / n_sub, cfg.tail_tolerance)

    target = mass(v)
    u = np.ascontiguousarray(v.values)
    for _ in range(n_sub):
        u = _kernels.uniformization_sum(p_diag, p_east, p_west, p_north, p_south, u, weights)
        if cfg.renormalize_mass:
            current = v.spec.h**2 * float(u.sum())
            if current > 0 and target > 0:
                u *= target / current
    return Field(v.spec, u)
