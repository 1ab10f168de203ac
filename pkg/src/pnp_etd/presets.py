"""Initial data and parameters for the four benchmark scenarios.

All scenarios live on the periodic square ``(-0.5, 0.5)^2``.

``convergence``
    ``p0 = cos^2(pi(x+y))``, ``n0 = cos^2(pi(x-y))``, no fixed charge, ``eps = 1``, ``T = 0.01``.
``gaussian_quadrupole``
    Four Gaussian fixed charges of alternating sign centred at ``(+-0.25, +-0.25)``,
    uniform ``p0 = n0 = 0.1``.
``discontinuous``
    ``rho_f = 4 chi([0.15, 0.25]^2)``, ``p0 = chi([0, 0.2]^2)``, ``n0 = 2 chi([0, 0.2]^2)``.
``saline``
    i.i.d. uniform[0, 1] concentrations (seeded) and two line charges
    ``+rho0`` at ``x = 0.25`` and ``-rho0`` at ``x = -0.25``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .expmv import ExpmvConfig
from .grid import Field, GridSpec, indicator
from .poisson import project_compatibility
from .stepper import SimParams

DOMAIN_LENGTH = 1.0
DOMAIN_ORIGIN = (-0.5, -0.5)

DEFAULT_SALINE_SEED = 20240917

# name -> constructor defaults
PRESET_DEFAULTS: dict[str, dict] = {
    "convergence": dict(n_per_axis=256, epsilon=1.0, tau=0.01 / 16, t_final=0.01),
    "gaussian_quadrupole": dict(n_per_axis=256, epsilon=1.0, tau=0.001, t_final=0.03),
    "discontinuous": dict(n_per_axis=256, epsilon=1.0, tau=0.01, t_final=0.1),
    "saline": dict(n_per_axis=256, epsilon=1.0, tau=0.01, t_final=0.05,
                   rho0=1.0, seed=DEFAULT_SALINE_SEED),
}


@dataclass(frozen=True)
class PresetSpec:
    name: str
    n_per_axis: int = 256
    epsilon: float = 1.0
    tau: float = 0.01
    t_final: float = 0.01
    rho0: Optional[float] = None
    seed: Optional[int] = None
    scheme: str = "etd2"
    expmv_cfg: ExpmvConfig = field(default_factory=ExpmvConfig)
    diagnostics_every: int = 1

    def __post_init__(self):
        if self.name not in PRESET_DEFAULTS:
            raise ValueError(f"unknown preset {self.name!r}; choose from {sorted(PRESET_DEFAULTS)}")
        if self.name == "saline":
            if self.seed is None:
                raise ValueError("the saline preset needs a seed")
            if self.rho0 is None:
                raise ValueError("the saline preset needs rho0")
        elif self.rho0 is not None or self.seed is not None:
            raise ValueError(f"rho0/seed only apply to the saline preset, not {self.name!r}")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n_per_axis, DOMAIN_LENGTH, DOMAIN_ORIGIN)

    def with_(self, **changes) -> "PresetSpec":
        return replace(self, **changes)


def default_spec(name: str, **overrides) -> PresetSpec:
    if name not in PRESET_DEFAULTS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESET_DEFAULTS)}")
    return PresetSpec(name=name, **{**PRESET_DEFAULTS[name], **overrides})


def _convergence(grid):
    p0 = Field.from_function(grid, lambda x, y: np.cos(np.pi * (x + y)) ** 2)
    n0 = Field.from_function(grid, lambda x, y: np.cos(np.pi * (x - y)) ** 2)
    return p0, n0, Field.constant(grid, 0.0)


def _periodic_gaussian(u, length):
    # images beyond +-2 periods are below double precision for this width
    return sum(np.exp(-100.0 * (u + m * length) ** 2) for m in range(-2, 3))


def _gaussian_quadrupole(grid, x0=0.25, y0=0.25):
    L = grid.length

    def rho(x, y):
        total = np.zeros_like(x)
        for sx in (1, -1):
            for sy in (1, -1):
                total += sx * sy * _periodic_gaussian(x + sx * x0, L) * _periodic_gaussian(y + sy * y0, L)
        return 200.0 * total

    return Field.constant(grid, 0.1), Field.constant(grid, 0.1), Field.from_function(grid, rho)


def _discontinuous(grid):
    box = indicator(grid, (0.0, 0.2), (0.0, 0.2))
    rho_f = 4.0 * indicator(grid, (0.15, 0.25), (0.15, 0.25))
    return box, 2.0 * box, rho_f


def nearest_column(grid: GridSpec, x: float) -> int:
    """Index of the node column closest to ``x`` (periodic)."""
    offset = (x - grid.origin[0]) / grid.h
    return int(np.round(offset)) % grid.n_per_axis


def _saline(grid, rho0, seed):
    rng = np.random.default_rng(seed)
    p0 = Field(grid, rng.uniform(0.0, 1.0, grid.shape))
    n0 = Field(grid, rng.uniform(0.0, 1.0, grid.shape))
    rho = np.zeros(grid.shape)
    rho[nearest_column(grid, 0.25), :] += rho0
    rho[nearest_column(grid, -0.25), :] -= rho0
    rho_f = Field(grid, rho)
    p0, n0 = project_compatibility(p0, n0, rho_f)
    return p0, n0, rho_f


def build_preset(spec: PresetSpec) -> tuple[Field, Field, Field, SimParams]:
    """Return ``(p0, n0, rho_f, params)`` for a scenario."""
    grid = spec.grid
    if spec.name == "convergence":
        p0, n0, rho_f = _convergence(grid)
    elif spec.name == "gaussian_quadrupole":
        p0, n0, rho_f = _gaussian_quadrupole(grid)
    elif spec.name == "discontinuous":
        p0, n0, rho_f = _discontinuous(grid)
    else:
        p0, n0, rho_f = _saline(grid, spec.rho0, spec.seed)

    params = SimParams(
        grid=grid,
        epsilon=spec.epsilon,
        tau=spec.tau,
        t_final=spec.t_final,
        rho_f=rho_f,
        scheme=spec.scheme,
        expmv_cfg=spec.expmv_cfg,
        diagnostics_every=spec.diagnostics_every,
    )
    return p0, n0, rho_f, params
