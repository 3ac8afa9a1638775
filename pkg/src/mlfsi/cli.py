"""Command-line front end: mesh, simulate, sweep, probe, all.

Every command is deterministic given (config, seed) and writes CSV/JSON
artifacts into the output directory. Exit codes: 0 success, 2 configuration
or validation error, 3 time-domain solver failure, 4 frequency-domain
singularity.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import evolution, geometry, resolvent
from .assembly import State, build_system
from .config import (
    ConfigError,
    DEFAULT_CONFIG_TEXT,
    RunConfig,
    default_config,
    load_config,
    with_overrides,
)
from .geometry import MeshConfigError, build_mesh, save_mesh
from .identities import manufactured_study
from .linalg import SingularMatrixError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TIME_SOLVER = 3
EXIT_FREQ_SINGULAR = 4


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_mesh(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    mesh = build_mesh(cfg.geometry)
    save_mesh(mesh, out / "mesh.txt")
    print(
        f"mesh: {mesh.vertices.shape[0]} vertices, {mesh.tets.shape[0]} tets "
        f"({int((mesh.tet_regions == geometry.SOLID).sum())} solid), "
        f"{mesh.tris.shape[0]} boundary triangles -> {out / 'mesh.txt'}"
    )
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    mesh = build_mesh(cfg.geometry)
    system = build_system(mesh)
    sc = cfg.simulate
    if sc.initial == "zero":
        x0 = State.zeros(system.dof)
    else:
        x0 = evolution.prepare_smooth_data(sc.seed, system)
    trace = evolution.simulate(x0, sc.T, sc.tau, system)
    trace.to_csv(out / "energy.csv")
    payload = {
        "window": list(sc.fit_window),
        "reference_exponent": evolution.DECAY_REFERENCE_EXPONENT,
        "max_balance_residual": trace.max_balance_residual(),
        "initial_energy": float(trace.E[0]),
    }
    if sc.initial == "zero":
        payload.update(fitted_exponent=0.0, amplitude=0.0, fit_residual=0.0, note="zero data")
    else:
        fit = evolution.fit_decay(trace, sc.fit_window)
        payload.update(
            fitted_exponent=fit.exponent, amplitude=fit.amplitude,
            fit_residual=fit.residual, samples=fit.n_samples,
        )
    _dump_json(payload, out / "decay.json")
    print(
        f"simulate: {len(trace.t) - 1} steps, fitted decay exponent "
        f"{payload['fitted_exponent']:.6g} (reference {2 / 11:.6g}) -> {out / 'energy.csv'}"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, jobs=1) -> int:
    out = _outdir(cfg)
    mesh = build_mesh(cfg.geometry)
    system = build_system(mesh)
    sw = cfg.sweep
    if sw.points < 2:
        raise ConfigError("insufficient points: a growth fit needs at least 2 frequencies")
    betas = np.logspace(np.log10(sw.beta_min), np.log10(sw.beta_max), sw.points)
    samples = resolvent.sweep(
        betas, system, probe_seed=sw.probe_seed, opnorm_tol=sw.opnorm_tol,
        solve_tol=cfg.solve_tol, jobs=jobs,
    )
    resolvent.write_sweep_csv(samples, out / "sweep.csv")
    fit = resolvent.fit_growth(samples)
    resolvent.write_growth_json(fit, out / "growth.json")
    print(
        f"sweep: {len(samples)} frequencies in [{sw.beta_min:g}, {sw.beta_max:g}], "
        f"growth slope {fit.slope:.6g} (reference {11 / 2}) -> {out / 'sweep.csv'}"
    )
    return EXIT_OK


def cmd_probe(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    pc = cfg.probe
    if not pc.manufactured:
        print("probe: manufactured study disabled in config; nothing to do")
        return EXIT_OK
    rows, orders = manufactured_study(pc.refinements, beta=pc.beta, base_config=cfg.geometry)
    payload = {
        "beta": pc.beta,
        "refinements": [r["n"] for r in rows],
        "radial": [r["radial"].as_dict() for r in rows],
        "unit_div": [r["unit_div"].as_dict() for r in rows],
        "orders": orders,
    }
    _dump_json(payload, out / "probe.json")
    print(
        f"probe: residual orders radial {orders['radial']:.3g}, "
        f"unit-div {orders['unit_div']:.3g} -> {out / 'probe.json'}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlfsi",
        description="Coupled heat / surface-wave / interior-wave numerical laboratory",
        epilog="Config file schema (with defaults):\n\n" + DEFAULT_CONFIG_TEXT,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=["mesh", "simulate", "sweep", "probe", "all"])
    parser.add_argument("--config", help="path to a key-value config file")
    parser.add_argument("--outdir", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="seed override for simulate and sweep probes")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweep")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            cfg = load_config(args.config) if args.config else default_config()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        cfg = with_overrides(cfg, seed=args.seed, output_dir=args.outdir)
        cfg.validate()
        if args.command in ("mesh", "all"):
            code = cmd_mesh(cfg)
            if code or args.command == "mesh":
                return code
        if args.command in ("simulate", "all"):
            code = cmd_simulate(cfg)
            if code or args.command == "simulate":
                return code
        if args.command in ("sweep", "all"):
            code = cmd_sweep(cfg, jobs=args.jobs)
            if code or args.command == "sweep":
                return code
        if args.command in ("probe", "all"):
            return cmd_probe(cfg)
        return EXIT_OK
    except (ConfigError, MeshConfigError, resolvent.InsufficientPointsError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except (evolution.SolverFailure, SingularMatrixError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_TIME_SOLVER
    except resolvent.FrequencySingularityError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_FREQ_SINGULAR


def console_main():
    raise SystemExit(main())
