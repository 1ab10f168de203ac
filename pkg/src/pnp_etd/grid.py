"""Uniform periodic grids, grid functions and the discrete calculus on them.

Nodes sit at ``x_i = x0 + i*h`` and ``y_j = y0 + j*h`` for ``i, j = 0..N-1``;
index ``N`` is identified with ``0``.  Field values are stored as an ``(N, N)``
array indexed ``values[i, j]``, i.e. axis 0 runs along x and axis 1 along y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Two fields living on different grids were combined."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of an ``N x N`` periodic grid on a square of edge ``length``."""

    n_per_axis: int
    length: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 2:
            raise ValueError(f"n_per_axis must be an integer >= 2, got {self.n_per_axis!r}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length!r}")
        object.__setattr__(self, "n_per_axis", int(self.n_per_axis))
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def mesh_size(self) -> float:
        return self.length / self.n_per_axis

    h = mesh_size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_per_axis, self.n_per_axis)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D node coordinates along x and y."""
        idx = np.arange(self.n_per_axis)
        return self.origin[0] + idx * self.h, self.origin[1] + idx * self.h

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays ``X[i, j] = x_i``, ``Y[i, j] = y_j``."""
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def refine_ratio(self, fine: "GridSpec") -> int:
        """Integer ``r`` such that coarse node ``i`` coincides with fine node ``r*i``."""
        if fine.length != self.length or fine.origin != self.origin:
            raise GridMismatchError("grids do not cover the same domain")
        ratio, rem = divmod(fine.n_per_axis, self.n_per_axis)
        if rem or ratio < 1:
            raise GridMismatchError(
                f"{fine.n_per_axis} nodes per axis is not a refinement of {self.n_per_axis}"
            )
        return ratio


@dataclass(frozen=True, eq=False)
class Field:
    """An immutable periodic grid function."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.shape != self.spec.shape:
            raise ValueError(f"values have shape {arr.shape}, grid expects {self.spec.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "Field":
        return cls(spec, np.full(spec.shape, float(value)))

    @classmethod
    def from_function(cls, spec: GridSpec, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "Field":
        X, Y = spec.coordinates()
        return cls(spec, np.broadcast_to(func(X, Y), spec.shape))

    def _other(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.spec, -self.values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def shift(self, a: int, b: int) -> "Field":
        """Cyclic shift by ``a`` nodes along x and ``b`` along y."""
        return Field(self.spec, np.roll(self.values, (a, b), axis=(0, 1)))

    def restrict_to(self, coarse: GridSpec) -> "Field":
        """Inject onto a coarser nested grid (coarse nodes are a subset of ours)."""
        r = coarse.refine_ratio(self.spec)
        return Field(coarse, self.values[::r, ::r])


def _check_same_grid(f: Field, g: Field) -> None:
    if f.spec != g.spec:
        raise GridMismatchError(f"fields live on different grids: {f.spec} vs {g.spec}")


def laplacian(f: Field) -> Field:
    """Five-point periodic Laplacian."""
    u = f.values
    lap = (
        np.roll(u, -1, 0) + np.roll(u, 1, 0) + np.roll(u, -1, 1) + np.roll(u, 1, 1) - 4.0 * u
    ) / f.spec.h**2
    return Field(f.spec, lap)


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product ``h^2 * sum(f*g)``."""
    _check_same_grid(f, g)
    return f.spec.h**2 * float(np.sum(f.values * g.values))


def h1_inner(f: Field, g: Field) -> float:
    """Discrete H1 semi-inner product built from backward face differences."""
    _check_same_grid(f, g)
    h = f.spec.h
    dxf = (f.values - np.roll(f.values, 1, 0)) / h
    dxg = (g.values - np.roll(g.values, 1, 0)) / h
    dyf = (f.values - np.roll(f.values, 1, 1)) / h
    dyg = (g.values - np.roll(g.values, 1, 1)) / h
    return h**2 * float(np.sum(dxf * dxg + dyf * dyg))


def mass(f: Field) -> float:
    return f.spec.h**2 * float(np.sum(f.values))


def mean(f: Field) -> float:
    return float(np.mean(f.values))


def indicator(spec: GridSpec, xlim: tuple[float, float], ylim: tuple[float, float]) -> Field:
    """Nodal indicator of the closed box ``xlim x ylim``."""
    X, Y = spec.coordinates()
    inside = (X >= xlim[0]) & (X <= xlim[1]) & (Y >= ylim[0]) & (Y <= ylim[1])
    return Field(spec, inside.astype(np.float64))
