"""Run configuration, CSV output and convergence studies behind the CLI."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .diagnostics import DiagRecord
from .expmv import ExpmvConfig
from .grid import Field, GridSpec
from .poisson import check_compatibility, project_compatibility
from .presets import DOMAIN_LENGTH, DOMAIN_ORIGIN, PresetSpec, build_preset, default_spec
from .stepper import SimParams, Sink, StepState, run

logger = logging.getLogger(__name__)

NUM_FMT = "%.16e"  # 17 significant digits


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class CompatibilityError(RuntimeError):
    """Initial net charge is not mean zero and projection was not requested (exit code 3)."""


# ---------------------------------------------------------------------------
# configuration

DESK_TIME = dict(n_per_axis=64, tau_divisors=[8, 16, 32, 64, 128, 256], reference_divisor=1024)
DESK_SPACE = dict(h_ladder=[8, 16, 32, 64, 128], reference_n=512)
PAPER_TIME = dict(n_per_axis=256, tau_divisors=[4, 8, 16, 32, 64, 128, 256, 512],
                  reference_divisor=1024)
PAPER_SPACE = dict(h_ladder=[8, 16, 32, 64, 128, 256, 512], reference_n=1024)


@dataclass(frozen=True)
class InlineInitialData:
    """Analytic initial data given as numpy expressions in ``x`` and ``y``."""

    n_per_axis: int
    p0: str
    n0: str
    rho_f: str = "0"
    epsilon: float = 1.0
    tau: float = 0.01
    t_final: float = 0.01
    length: float = DOMAIN_LENGTH
    origin: tuple[float, float] = DOMAIN_ORIGIN

    def evaluate(self) -> tuple[Field, Field, Field]:
        grid = GridSpec(self.n_per_axis, self.length, self.origin)
        X, Y = grid.coordinates()
        names = {name: getattr(np, name) for name in
                 ("sin", "cos", "exp", "tanh", "sqrt", "abs", "where", "pi", "minimum", "maximum")}
        names.update(x=X, y=Y, np=np)

        def ev(expr):
            try:
                val = eval(expr, {"__builtins__": {}}, names)  # noqa: S307 - trusted local config
            except Exception as exc:
                raise ConfigError(f"cannot evaluate initial-data expression {expr!r}: {exc}") from exc
            return Field(grid, np.broadcast_to(np.asarray(val, dtype=float), grid.shape))

        return ev(self.p0), ev(self.n0), ev(self.rho_f)


@dataclass(frozen=True)
class RunConfig:
    preset: PresetSpec | InlineInitialData
    scheme: str = "etd2"
    output_dir: Path = Path("pnp_output")
    snapshot_times: tuple[float, ...] = ()
    diagnostics_every: int = 1
    expmv: ExpmvConfig = field(default_factory=ExpmvConfig)
    compatibility_projection: bool = False
    paper_scale: bool = False
    convergence: dict = field(default_factory=dict)

    @property
    def t_final(self) -> float:
        return self.preset.t_final

    @property
    def tau(self) -> float:
        return self.preset.tau

    def build(self) -> tuple[Field, Field, Field, SimParams]:
        """Initial data and simulation parameters, with the compatibility policy applied."""
        if isinstance(self.preset, PresetSpec):
            spec = self.preset.with_(scheme=self.scheme, expmv_cfg=self.expmv,
                                     diagnostics_every=self.diagnostics_every)
            p0, n0, rho_f, params = build_preset(spec)
        else:
            p0, n0, rho_f = self.preset.evaluate()
            params = SimParams(grid=p0.spec, epsilon=self.preset.epsilon, tau=self.preset.tau,
                               t_final=self.preset.t_final, rho_f=rho_f, scheme=self.scheme,
                               expmv_cfg=self.expmv, diagnostics_every=self.diagnostics_every)
        if min(p0.min(), n0.min()) < 0:
            raise ConfigError("initial concentrations must be nonnegative")
        imbalance = check_compatibility(p0, n0, rho_f)
        scale = max(1.0, (p0 - n0 + rho_f).sup_norm())
        if abs(imbalance) > params.mean_tolerance * scale:
            if not self.compatibility_projection:
                raise CompatibilityError(
                    f"initial net charge {imbalance:.3e} is not zero; "
                    "pass --project-compatibility to shift a species")
            p0, n0 = project_compatibility(p0, n0, rho_f)
        return p0, n0, rho_f, params


def _preset_from_dict(d: dict) -> PresetSpec | InlineInitialData:
    d = dict(d)
    if "p0" in d or "n0" in d:
        try:
            if "origin" in d:
                d["origin"] = tuple(d["origin"])
            return InlineInitialData(**d)
        except TypeError as exc:
            raise ConfigError(f"bad inline initial data: {exc}") from exc
    name = d.pop("name", None)
    if name is None:
        raise ConfigError("preset section needs a 'name' (or inline 'p0'/'n0' expressions)")
    try:
        return default_spec(name, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    known = {"preset", "scheme", "output_dir", "snapshot_times", "diagnostics_every", "expmv",
             "compatibility_projection", "paper_scale", "convergence"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "preset" not in raw:
        raise ConfigError("config needs a 'preset' section")
    try:
        expmv_cfg = ExpmvConfig(**raw.get("expmv", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad expmv section: {exc}") from exc
    cfg = RunConfig(
        preset=_preset_from_dict(raw["preset"]),
        scheme=str(raw.get("scheme", "etd2")).lower(),
        output_dir=Path(raw.get("output_dir", "pnp_output")),
        snapshot_times=tuple(float(t) for t in raw.get("snapshot_times", ())),
        diagnostics_every=int(raw.get("diagnostics_every", 1)),
        expmv=expmv_cfg,
        compatibility_projection=bool(raw.get("compatibility_projection", False)),
        paper_scale=bool(raw.get("paper_scale", False)),
        convergence=dict(raw.get("convergence", {})),
    )
    if cfg.scheme not in ("etd1", "etd2"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    return cfg


def load_config(path: str | os.PathLike) -> dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_override(raw: dict, dotted_key: str, value: str) -> None:
    """Set ``raw[a][b]... = value`` for ``dotted_key = 'a.b...'``, parsing value as JSON when possible."""
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    *parents, leaf = dotted_key.split(".")
    node = raw
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted_key}: {key} is not a section")
    node[leaf] = parsed


# ---------------------------------------------------------------------------
# CSV output

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return NUM_FMT % x


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_field(path: Path, f: Field) -> None:
    """One row per y index ``j``, one column per x index ``i``."""
    np.savetxt(path, f.values.T, fmt=NUM_FMT, delimiter=",")


def read_field(path: Path, spec: GridSpec) -> Field:
    return Field(spec, np.loadtxt(path, delimiter=",", ndmin=2).T)


def format_time(t: float) -> str:
    return f"{t:.6g}"


def diag_row(rec: DiagRecord) -> tuple:
    return (rec.time, rec.step, rec.min_p, rec.min_n, rec.mass_p_drift, rec.mass_n_drift,
            rec.energy, rec.modified_energy)


class CsvSink(Sink):
    """Collects diagnostics rows and writes snapshot files as they arrive."""

    def __init__(self, output_dir: Path):
        self.output_dir = output_dir
        self.records: list[DiagRecord] = []

    def on_record(self, rec):
        self.records.append(rec)

    def on_snapshot(self, time, state):
        stamp = format_time(time)
        write_field(self.output_dir / f"p_t{stamp}.csv", state.p_curr)
        write_field(self.output_dir / f"n_t{stamp}.csv", state.n_curr)
        write_field(self.output_dir / f"phi_t{stamp}.csv", state.phi_curr)

    def write_diagnostics(self):
        write_csv(self.output_dir / "diagnostics.csv", DiagRecord.CSV_HEADER,
                  [diag_row(r) for r in self.records])


def cmd_run(config: RunConfig) -> StepState:
    """Run one trajectory, writing ``diagnostics.csv`` and the requested snapshots."""
    p0, n0, _, params = config.build()
    config.output_dir.mkdir(parents=True, exist_ok=True)
    sink = CsvSink(config.output_dir)
    try:
        final = run(params, p0, n0, sink, config.snapshot_times)
    finally:
        sink.write_diagnostics()
    return final


# ---------------------------------------------------------------------------
# convergence studies

@dataclass(frozen=True)
class ConvergenceRow:
    resolution: int
    error_p: float
    error_n: float
    error_phi: float
    rate_p: Optional[float] = None
    rate_n: Optional[float] = None
    rate_phi: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors against a reference run; ``resolution`` is ``T/tau`` or ``1/h``."""

    rows: tuple[ConvergenceRow, ...]
    label: str = "resolution"

    HEADER = ("error_p", "rate_p", "error_n", "rate_n", "error_phi", "rate_phi")

    @classmethod
    def from_errors(cls, resolutions, errors, label="resolution") -> "ConvergenceReport":
        rows = []
        prev = None
        for res, (ep, en, ephi) in zip(resolutions, errors):
            if prev is None:
                rows.append(ConvergenceRow(res, ep, en, ephi))
            else:
                rows.append(ConvergenceRow(res, ep, en, ephi,
                                           _rate(prev[0], ep), _rate(prev[1], en), _rate(prev[2], ephi)))
            prev = (ep, en, ephi)
        return cls(tuple(rows), label)

    def errors(self, which: str) -> np.ndarray:
        return np.array([getattr(r, f"error_{which}") for r in self.rows])

    def resolutions(self) -> np.ndarray:
        return np.array([r.resolution for r in self.rows])

    def write_csv(self, path: Path) -> None:
        write_csv(path, (self.label,) + self.HEADER,
                  [(r.resolution, r.error_p, r.rate_p, r.error_n, r.rate_n, r.error_phi, r.rate_phi)
                   for r in self.rows])

    def format_table(self) -> str:
        lines = [f"{self.label:>10} " + " ".join(f"{h:>11}" for h in self.HEADER)]
        for r in self.rows:
            cells = [r.error_p, r.rate_p, r.error_n, r.rate_n, r.error_phi, r.rate_phi]
            lines.append(f"{r.resolution:>10} " + " ".join(
                f"{'---':>11}" if c is None else (f"{c:11.4e}" if i % 2 == 0 else f"{c:11.2f}")
                for i, c in enumerate(cells)))
        return "\n".join(lines)


def _rate(coarse_err: float, fine_err: float) -> float:
    if fine_err <= 0 or coarse_err <= 0:
        return math.nan
    return math.log2(coarse_err / fine_err)


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("PNP_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _final_state(config: RunConfig, scheme: str, **overrides) -> StepState:
    preset = config.preset
    if isinstance(preset, PresetSpec):
        preset = preset.with_(**overrides)
    else:
        preset = InlineInitialData(**{**preset.__dict__, **overrides})
    cfg = RunConfig(preset=preset, scheme=scheme,
                    expmv=config.expmv, diagnostics_every=config.diagnostics_every,
                    compatibility_projection=config.compatibility_projection)
    p0, n0, _, params = cfg.build()
    return run(params, p0, n0)


def _field_errors(coarse: StepState, reference: StepState) -> tuple[float, float, float]:
    spec = coarse.p_curr.spec
    ref_p = reference.p_curr.restrict_to(spec)
    ref_n = reference.n_curr.restrict_to(spec)
    ref_phi = reference.phi_curr.restrict_to(spec)
    dphi = (coarse.phi_curr.values - coarse.phi_curr.values.mean()) - (ref_phi.values - ref_phi.values.mean())
    return ((coarse.p_curr - ref_p).sup_norm(),
            (coarse.n_curr - ref_n).sup_norm(),
            float(np.abs(dphi).max()))


def _check_doubling(values: Sequence[int], what: str) -> None:
    for a, b in zip(values, values[1:]):
        if b != 2 * a:
            raise ConfigError(f"{what} must double from one entry to the next, got {list(values)}")


def converge_time(
    base: RunConfig,
    tau_divisors: Sequence[int],
    reference_divisor: int,
    n_per_axis: Optional[int] = None,
) -> ConvergenceReport:
    """Temporal errors ``|u_tau(T) - u_ref(T)|_inf`` on a fixed grid.

    The reference is always ETD2 with ``tau = T/reference_divisor``; the
    ladder uses ``base.scheme``.  Ladder entries are ``T/tau`` values.
    """
    tau_divisors = [int(d) for d in tau_divisors]
    if not tau_divisors:
        raise ConfigError("empty time-step ladder")
    if reference_divisor in tau_divisors:
        raise ConfigError("the reference time step must not appear in the ladder")
    _check_doubling(tau_divisors, "time-step ladder")
    T = base.t_final
    grid_kw = {} if n_per_axis is None else {"n_per_axis": int(n_per_axis)}

    jobs = [dict(tau=T / reference_divisor, scheme="etd2", **grid_kw)]
    jobs += [dict(tau=T / d, scheme=base.scheme, **grid_kw) for d in tau_divisors]
    with ThreadPoolExecutor(_worker_count(len(jobs))) as pool:
        finals = list(pool.map(lambda kw: _final_state(base, **kw), jobs))
    reference, ladder = finals[0], finals[1:]
    errors = [_field_errors(s, reference) for s in ladder]
    return ConvergenceReport.from_errors(tau_divisors, errors, label="T/tau")


def converge_space(
    base: RunConfig,
    h_ladder: Sequence[int],
    reference_n: int,
) -> ConvergenceReport:
    """Spatial errors of single ETD1 steps with ``tau = T``, injected onto each coarse grid.

    Ladder entries are ``1/h`` (nodes per unit length on the unit domain).
    """
    h_ladder = [int(n) for n in h_ladder]
    if not h_ladder:
        raise ConfigError("empty mesh ladder")
    if reference_n in h_ladder:
        raise ConfigError("the reference mesh must not appear in the ladder")
    _check_doubling(h_ladder, "mesh ladder")
    for n in h_ladder:
        if reference_n % n or (reference_n // n) & (reference_n // n - 1):
            raise ConfigError(f"mesh 1/{n} is not nested in the reference mesh 1/{reference_n}")
    T = base.t_final
    jobs = [dict(n_per_axis=reference_n, tau=T, scheme="etd1")]
    jobs += [dict(n_per_axis=n, tau=T, scheme="etd1") for n in h_ladder]
    with ThreadPoolExecutor(_worker_count(len(jobs))) as pool:
        finals = list(pool.map(lambda kw: _final_state(base, **kw), jobs))
    reference, ladder = finals[0], finals[1:]
    errors = [_field_errors(s, reference) for s in ladder]
    return ConvergenceReport.from_errors(h_ladder, errors, label="1/h")


def convergence_settings(config: RunConfig, kind: str) -> dict:
    """Ladder settings for ``kind`` in ``{'time', 'space'}``: defaults, then config overrides."""
    if kind == "time":
        settings = dict(PAPER_TIME if config.paper_scale else DESK_TIME)
    else:
        settings = dict(PAPER_SPACE if config.paper_scale else DESK_SPACE)
    settings.update({k: v for k, v in config.convergence.items() if k in settings})
    return settings
