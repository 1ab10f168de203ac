"""Command-line entry point ``pnp-etd``.

Subcommands::

    pnp-etd run --config run.json [--scheme etd2] [--tau 0.001] ...
    pnp-etd converge-time [--config conv.json] [--scheme etd1] [--paper-scale]
    pnp-etd converge-space [--config conv.json] [--paper-scale]
    pnp-etd presets

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .harness import (
    CompatibilityError,
    ConfigError,
    apply_override,
    cmd_run,
    config_from_dict,
    converge_space,
    converge_time,
    convergence_settings,
    load_config,
)
from .poisson import ChargeCompatibilityError
from .presets import PRESET_DEFAULTS, default_spec
from .stepper import StepError, snapshot_steps

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _error_line(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--preset", help="preset name (overrides preset.name)")
    p.add_argument("--scheme", choices=["etd1", "etd2"])
    p.add_argument("--tau", type=float)
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--rho0", type=float)
    p.add_argument("--n-per-axis", type=int, dest="n_per_axis")
    p.add_argument("--output-dir", type=Path, dest="output_dir")
    p.add_argument("--paper-scale", action="store_true", default=None, dest="paper_scale")
    p.add_argument("--project-compatibility", action="store_true", default=None,
                   dest="compatibility_projection")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set expmv.tail_tolerance=1e-13")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnp-etd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "converge-time", "converge-space"):
        _add_common(sub.add_parser(name))
    sub.add_parser("presets", help="list presets and their constants")
    return parser


def _raw_config(args, default_preset: str | None) -> dict:
    raw = load_config(args.config) if args.config else {}
    if args.preset:
        raw.setdefault("preset", {})["name"] = args.preset
    if "preset" not in raw and default_preset:
        raw["preset"] = {"name": default_preset}
    preset = raw.get("preset", {})
    for key in ("tau", "t_final", "epsilon", "seed", "rho0", "n_per_axis"):
        value = getattr(args, key)
        if value is not None:
            preset[key] = value
    for key in ("scheme", "paper_scale", "compatibility_projection"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    if args.output_dir is not None:
        raw["output_dir"] = str(args.output_dir)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        apply_override(raw, key, value)
    return raw


def _run(args) -> int:
    config = config_from_dict(_raw_config(args, None))
    p0, n0, rho_f, params = config.build()
    try:
        snapshot_steps(params, config.snapshot_times)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    final = cmd_run(config)
    logging.getLogger(__name__).info("finished %d steps, output in %s",
                                     final.step_index, config.output_dir)
    return EXIT_OK


def _converge(args, kind: str) -> int:
    config = config_from_dict(_raw_config(args, "convergence"))
    settings = convergence_settings(config, kind)
    if kind == "time":
        report = converge_time(config, settings["tau_divisors"], settings["reference_divisor"],
                               settings["n_per_axis"])
        name = f"convergence_time_{config.scheme}.csv"
    else:
        report = converge_space(config, settings["h_ladder"], settings["reference_n"])
        name = "convergence_space.csv"
    config.output_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(config.output_dir / name)
    print(report.format_table())
    return EXIT_OK


def _presets(_args) -> int:
    listing = {}
    for name in PRESET_DEFAULTS:
        spec = asdict(default_spec(name))
        spec.pop("expmv_cfg")
        listing[name] = spec
    print(json.dumps(listing, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "run": _run,
        "converge-time": lambda a: _converge(a, "time"),
        "converge-space": lambda a: _converge(a, "space"),
        "presets": _presets,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        _error_line("config", str(exc))
        return EXIT_CONFIG
    except (CompatibilityError, ChargeCompatibilityError) as exc:
        _error_line("compatibility", str(exc))
        return EXIT_NUMERIC
    except StepError as exc:
        _error_line("step", str(exc.cause), step=exc.step)
        return EXIT_NUMERIC
    except ValueError as exc:
        _error_line("config", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
