"""First- and second-order exponential time differencing for the PNP system.

Each step freezes the potential, so the two ion species decouple into linear
problems ``u' = L[-/+phi^k] u`` that are advanced exactly by ``exp``:

    ETD1:  p^{k+1} = exp(tau  L[-phi^k]) p^k,      n^{k+1} = exp(tau  L[phi^k]) n^k
    ETD2:  p^{k+1} = exp(2tau L[-phi^k]) p^{k-1},  n^{k+1} = exp(2tau L[phi^k]) n^{k-1}

followed by a Poisson solve for ``phi^{k+1}``.  ETD2 takes one ETD1 step first.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import operator as ops
from .diagnostics import DiagRecord, record
from .expmv import ExpmvConfig, expmv
from .grid import Field, GridSpec, mass
from .poisson import PoissonSolver

logger = logging.getLogger(__name__)

SCHEMES = ("etd1", "etd2")


class StepError(RuntimeError):
    """A time step failed; ``step`` is the index of the state being advanced."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class SimParams:
    grid: GridSpec
    epsilon: float
    tau: float
    t_final: float
    rho_f: Field
    scheme: str = "etd2"
    expmv_cfg: ExpmvConfig = field(default_factory=ExpmvConfig)
    diagnostics_every: int = 1
    mean_tolerance: float = 1e-10

    def __post_init__(self):
        scheme = self.scheme.lower()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tau > 0 or not self.t_final >= 0:
            raise ValueError("need tau > 0 and t_final >= 0")
        if self.t_final > 0 and self.tau > self.t_final * (1 + 1e-12):
            raise ValueError(f"tau={self.tau} exceeds t_final={self.t_final}")
        ratio = self.t_final / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"t_final/tau = {ratio} is not an integer step count")
        if self.rho_f.spec != self.grid:
            raise ValueError("rho_f lives on a different grid")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.tau))

    def poisson_solver(self) -> PoissonSolver:
        return PoissonSolver(self.grid, self.epsilon, self.mean_tolerance)


@dataclass(frozen=True)
class StepState:
    """Solution levels carried between steps.

    ``p_prev``/``n_prev``/``phi_prev`` hold level ``k-1`` and are ``None`` at ``k = 0``.
    """

    step_index: int
    p_curr: Field
    n_curr: Field
    phi_curr: Field
    p_prev: Optional[Field] = None
    n_prev: Optional[Field] = None
    phi_prev: Optional[Field] = None

    def advance(self, p_next: Field, n_next: Field, phi_next: Field) -> "StepState":
        return StepState(self.step_index + 1, p_next, n_next, phi_next,
                         self.p_curr, self.n_curr, self.phi_curr)


def potential(p: Field, n: Field, rho_f: Field, solver: PoissonSolver) -> Field:
    return solver.solve(p - n + rho_f)


def initial_state(p0: Field, n0: Field, params: SimParams,
                  solver: PoissonSolver | None = None) -> StepState:
    if p0.min() < 0 or n0.min() < 0:
        raise ValueError("initial concentrations must be nonnegative")
    solver = solver or params.poisson_solver()
    return StepState(0, p0, n0, potential(p0, n0, params.rho_f, solver))


def _exp_pair(phi: Field, p: Field, n: Field, t: float, cfg: ExpmvConfig) -> tuple[Field, Field]:
    p_new = expmv(ops.build(phi, -1), p, t, cfg)
    n_new = expmv(ops.build(phi, +1), n, t, cfg)
    return p_new, n_new


def etd1_step(state: StepState, params: SimParams, solver: PoissonSolver | None = None) -> StepState:
    solver = solver or params.poisson_solver()
    p_next, n_next = _exp_pair(state.phi_curr, state.p_curr, state.n_curr,
                               params.tau, params.expmv_cfg)
    return state.advance(p_next, n_next, potential(p_next, n_next, params.rho_f, solver))


def etd2_step(state: StepState, params: SimParams, solver: PoissonSolver | None = None) -> StepState:
    if state.p_prev is None or state.n_prev is None:
        raise ValueError("ETD2 needs the previous level; bootstrap with an ETD1 step")
    solver = solver or params.poisson_solver()
    p_next, n_next = _exp_pair(state.phi_curr, state.p_prev, state.n_prev,
                               2.0 * params.tau, params.expmv_cfg)
    return state.advance(p_next, n_next, potential(p_next, n_next, params.rho_f, solver))


class Sink:
    """Receiver for diagnostics and snapshots emitted by :func:`run`. Does nothing by default."""

    def on_record(self, rec: DiagRecord) -> None:
        pass

    def on_snapshot(self, time: float, state: StepState) -> None:
        pass


class MemorySink(Sink):
    def __init__(self):
        self.records: list[DiagRecord] = []
        self.snapshots: dict[float, StepState] = {}

    def on_record(self, rec):
        self.records.append(rec)

    def on_snapshot(self, time, state):
        self.snapshots[time] = state


def snapshot_steps(params: SimParams, times: Sequence[float]) -> dict[int, float]:
    """Map each requested time onto its step index; times must sit within tau/2 of a step."""
    steps = {}
    for t in times:
        if t < -0.5 * params.tau or t > params.t_final + 0.5 * params.tau:
            raise ValueError(f"snapshot time {t} outside [0, {params.t_final}]")
        k = int(round(t / params.tau))
        if abs(k * params.tau - t) > 0.5 * params.tau:
            raise ValueError(f"snapshot time {t} is not near a step time")
        steps[k] = t
    return steps


def run(
    params: SimParams,
    p0: Field,
    n0: Field,
    sink: Sink | None = None,
    snapshot_times: Sequence[float] = (),
) -> StepState:
    """Advance ``params.n_steps`` steps and return the final state.

    A diagnostic record is emitted for the initial state, every
    ``diagnostics_every`` steps and for the final state.
    """
    sink = sink or Sink()
    solver = params.poisson_solver()
    snaps = snapshot_steps(params, snapshot_times)
    initial_masses = (mass(p0), mass(n0))
    state = initial_state(p0, n0, params, solver)
    n_steps = params.n_steps

    def emit(st: StepState):
        if st.step_index % params.diagnostics_every == 0 or st.step_index == n_steps:
            sink.on_record(record(st, initial_masses, params))
        if st.step_index in snaps:
            sink.on_snapshot(snaps[st.step_index], st)

    emit(state)
    for k in range(n_steps):
        try:
            if params.scheme == "etd1" or state.p_prev is None:
                state = etd1_step(state, params, solver)
            else:
                state = etd2_step(state, params, solver)
        except Exception as exc:
            raise StepError(k, exc) from exc
        logger.debug("step %d/%d done", k + 1, n_steps)
        emit(state)
    return state
