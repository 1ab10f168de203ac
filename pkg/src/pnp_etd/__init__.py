"""Structure-preserving exponential time differencing for the periodic Poisson-Nernst-Planck system."""

from .diagnostics import DiagRecord, energy, entropy, modified_energy
from .expmv import ExpmvConfig, expmv, poisson_truncation_order
from .grid import Field, GridSpec, h1_inner, inner, laplacian, mass
from .operator import SlotboomOperator, apply, build, entropy_dissipation, max_diag_magnitude
from .poisson import ChargeCompatibilityError, PoissonSolver, check_compatibility, project_compatibility
from .presets import PresetSpec, build_preset, default_spec
from .stepper import MemorySink, SimParams, Sink, StepState, etd1_step, etd2_step, initial_state, run

__version__ = "0.1.0"
