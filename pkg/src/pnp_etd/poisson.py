"""Periodic Poisson solve ``-eps^2 Lap_h phi = rhs`` in the mean-zero gauge."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, GridSpec, mass


class ChargeCompatibilityError(ValueError):
    """The net charge ``p - n + rho_f`` does not have (numerically) zero mean."""


@dataclass(frozen=True)
class PoissonSolver:
    """Direct spectral inverse of the five-point Laplacian on a periodic grid.

    The discrete Fourier modes diagonalize the stencil exactly, with symbol
    ``-(4/h^2) (sin^2(pi k/N) + sin^2(pi l/N))``.  The zero mode of the
    solution is set to zero.
    """

    spec: GridSpec
    epsilon: float
    mean_tolerance: float = 1e-10
    _inv_symbol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.mean_tolerance >= 0:
            raise ValueError("mean_tolerance must be nonnegative")
        n, h = self.spec.n_per_axis, self.spec.h
        sx = np.sin(np.pi * np.arange(n) / n) ** 2
        sy = np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2
        symbol = self.epsilon**2 * (4.0 / h**2) * (sx[:, None] + sy[None, :])
        symbol[0, 0] = np.inf
        object.__setattr__(self, "_inv_symbol", 1.0 / symbol)

    def solve(self, rhs: Field) -> Field:
        if rhs.spec != self.spec:
            raise ValueError("right-hand side lives on a different grid")
        scale = max(1.0, rhs.sup_norm())
        total = mass(rhs)
        if abs(total) > self.mean_tolerance * scale:
            raise ChargeCompatibilityError(
                f"net charge {total:.3e} exceeds tolerance "
                f"{self.mean_tolerance:.1e} x {scale:.3e}"
            )
        rhs_hat = np.fft.rfft2(rhs.values)
        phi = np.fft.irfft2(rhs_hat * self._inv_symbol, s=self.spec.shape)
        phi -= phi.mean()
        return Field(self.spec, phi)


def check_compatibility(p: Field, n: Field, rho_f: Field) -> float:
    """Net charge ``<p - n + rho_f, 1>_h``; zero for a solvable Poisson problem."""
    return mass(p) - mass(n) + mass(rho_f)


def project_compatibility(p: Field, n: Field, rho_f: Field) -> tuple[Field, Field]:
    """Restore zero net charge by adding a nonnegative constant to one species.

    The deficient species is raised, so both concentrations stay nonnegative.
    """
    area = p.spec.length**2
    shift = check_compatibility(p, n, rho_f) / area
    if shift >= 0:
        return p, n + shift
    return p - shift, n
