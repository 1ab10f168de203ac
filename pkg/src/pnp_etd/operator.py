"""Slotboom-form drift-diffusion operator with harmonic-mean face coefficients.

For a potential ``psi`` the operator acts as

    (L[psi] u)_l = sum_k  w(l <- k) u_k  -  (sum_k w(k <- l)) u_l ,

over the four periodic neighbours ``k`` of node ``l``, with

    w(l <- k) = (1/h^2) * hm(e^psi_l, e^psi_k) * e^-psi_k = (2/h^2) / (1 + exp(psi_k - psi_l))

where ``hm`` is the harmonic mean.  Each column of the operator sums to zero,
so ``-L`` is a singular M-matrix and ``exp(tL)`` is a mass-preserving,
nonnegative map.

Positive ions evolve with ``psi = -phi`` and negative ions with ``psi = +phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Field, GridSpec, inner, _check_same_grid


def face_weight(delta: np.ndarray) -> np.ndarray:
    """Harmonic-mean face coefficient ``1 / (1 + exp(delta))``, times ``2/h^2`` by the caller.

    ``delta`` is the potential of the source node minus that of the receiving
    node.  Evaluated through ``exp(-|delta|)`` so it neither overflows nor
    loses the small tail for large ``|delta|``.
    """
    z = np.exp(-np.abs(delta))
    return np.where(delta > 0, z / (1.0 + z), 1.0 / (1.0 + z))


@dataclass(frozen=True, eq=False)
class SlotboomOperator:
    """Five-point stencil coefficients of ``L[psi]`` stored per node.

    ``east[i, j]`` is the coefficient of ``u[i+1, j]`` in ``(L u)[i, j]``;
    ``west``, ``north`` and ``south`` refer to ``u[i-1, j]``, ``u[i, j+1]``
    and ``u[i, j-1]``.  ``diag`` is the (nonpositive) coefficient of ``u[i, j]``.
    """

    spec: GridSpec
    potential: Field
    diag: Field
    east: Field
    west: Field
    north: Field
    south: Field

    def arrays(self):
        return (self.diag.values, self.east.values, self.west.values,
                self.north.values, self.south.values)

    def to_dense(self) -> np.ndarray:
        """Assemble the ``N^2 x N^2`` matrix (row-major node order). Debugging only."""
        n = self.spec.n_per_axis
        idx = np.arange(n * n).reshape(n, n)
        A = np.zeros((n * n, n * n))
        A[idx.ravel(), idx.ravel()] = self.diag.values.ravel()
        for coeff, shift in ((self.east, (-1, 0)), (self.west, (1, 0)),
                             (self.north, (0, -1)), (self.south, (0, 1))):
            nbr = np.roll(idx, shift, axis=(0, 1))
            np.add.at(A, (idx.ravel(), nbr.ravel()), coeff.values.ravel())
        return A


def build(phi: Field, species_sign: int) -> SlotboomOperator:
    """Build ``L[species_sign * phi]``.

    ``species_sign=-1`` gives the positive-ion operator, ``+1`` the
    negative-ion one.
    """
    if species_sign not in (1, -1):
        raise ValueError(f"species_sign must be +1 or -1, got {species_sign!r}")
    psi = phi.values * species_sign
    spec = phi.spec
    c = 2.0 / spec.h**2

    east = c * face_weight(np.roll(psi, -1, 0) - psi)
    west = c * face_weight(np.roll(psi, 1, 0) - psi)
    north = c * face_weight(np.roll(psi, -1, 1) - psi)
    south = c * face_weight(np.roll(psi, 1, 1) - psi)
    # Outflow from node l is what its neighbours receive from it; this makes
    # every column sum to zero up to a four-term rounding.
    diag = -(np.roll(west, -1, 0) + np.roll(east, 1, 0)
             + np.roll(south, -1, 1) + np.roll(north, 1, 1))

    return SlotboomOperator(
        spec=spec,
        potential=Field(spec, psi),
        diag=Field(spec, diag),
        east=Field(spec, east),
        west=Field(spec, west),
        north=Field(spec, north),
        south=Field(spec, south),
    )


def apply(op: SlotboomOperator, f: Field) -> Field:
    _check_same_grid(op.potential, f)
    out = np.empty(op.spec.shape)
    _kernels.stencil_apply(*op.arrays(), f.values, out)
    return Field(op.spec, out)


def max_diag_magnitude(op: SlotboomOperator) -> float:
    """Uniformization rate: the largest outflow rate over all nodes."""
    return float(np.max(-op.diag.values))


def entropy_dissipation(op: SlotboomOperator, f: Field) -> float:
    """``<L f, ln(f / e^psi)>_h``, which is never positive for ``f > 0``."""
    if np.any(f.values <= 0):
        raise ValueError("entropy dissipation requires a strictly positive field")
    slotboom_log = Field(op.spec, np.log(f.values) - op.potential.values)
    return inner(apply(op, f), slotboom_log)
