"""Command-line entry point: ``cs2dcool <subcommand> --config cfg.json``.

Exit codes: 0 success, 1 configuration error, 2 numerical non-convergence,
3 instability at a requested single point.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError, EquilibriumError, InstabilityError, TrackingError

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_UNSTABLE = 0, 1, 2, 3
SUBCOMMANDS = ("derive", "eigenmodes", "spectrum", "occupancy", "brightdark", "scan", "goldilocks")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _write_json(out: Path, name: str, payload: dict) -> Path:
    path = out / name
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not argparse's default exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cs2dcool", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment configuration")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--mode", default="2d", choices=("2d", "3d"))
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--threads", type=int, default=1)
        if name == "scan":
            s.add_argument("--axis1", required=True, help="name:min:max:points")
            s.add_argument("--axis2", required=True, help="name:min:max:points")
            s.add_argument("--fixed-detuning", action="store_true",
                           help="keep the config detuning instead of -mean frequency per cell")
    return p


def _model(cfg, mode):
    from .equilibrium import coupling_table
    from .linear_model import build_model
    from .params import derive_params

    derived = derive_params(cfg)
    model = build_model(derived, coupling_table(derived), mode=mode)
    return derived, model


def cmd_derive(cfg, args, out):
    from .params import derive_params

    report = derive_params(cfg).report()
    report["config"] = cfg.to_dict()
    return [_write_json(out, "derive.json", report)]


def cmd_eigenmodes(cfg, args, out):
    from .equilibrium import coupling_table
    from .linear_model import (bloch_trajectories, equal_coupling_table, normal_mode_frequencies,
                               position_modes, trajectory_to_csv)

    derived, model = _model(cfg, args.mode)
    lam = model.eigenvalues()
    lam = lam[np.lexsort((lam.real, lam.imag))]
    w, V = position_modes(derived, coupling_table(derived), derived.detuning)
    payload = {
        "labels": list(model.mode_labels),
        "eigenvalues": [{"re": float(z.real), "im": float(z.imag)} for z in lam],
        "stable": bool(model.max_real_part() < 0),
        "normal_mode_frequencies": normal_mode_frequencies(
            derived.omega_x, derived.omega_y, derived.detuning, derived.g_x, derived.g_y).tolist(),
        "position_modes": {"frequency": w.tolist(),
                           "vectors_xyZ": [[{"re": float(z.real), "im": float(z.imag)} for z in V[:, c]]
                                           for c in range(3)]},
    }
    # Bloch trajectories of the g_x = g_y reference case across the crossing
    w0 = derived.omega_mean
    grid = -np.linspace(0.5 * w0, 1.5 * w0, 201)
    traj = bloch_trajectories(derived, equal_coupling_table(coupling_table(derived)), grid)
    tpath = out / "trajectory.csv"
    tpath.write_text(trajectory_to_csv(traj), encoding="utf-8")
    return [_write_json(out, "eigenmodes.json", payload), tpath]


def cmd_spectrum(cfg, args, out):
    from .scan import records_to_csv
    from .spectra import heterodyne_psd, resonance_grid, transfer_psd

    derived, model = _model(cfg, args.mode)
    model.check_stable()
    omega = resonance_grid(model)
    spec = transfer_psd(model, omega)
    het = heterodyne_psd(model, omega, lo_offset=derived.lo_offset)
    cols = ["omega_hz", "s_xx", "s_yy"] + (["s_zz"] if args.mode == "3d" else []) + ["s_het", "s_het_rescaled"]
    rows = []
    for i, w in enumerate(omega):
        r = {"omega_hz": w / (2 * math.pi), "s_xx": spec["S_xx"][i], "s_yy": spec["S_yy"][i],
             "s_het": het["S_het"][i], "s_het_rescaled": het["S_het_rescaled"][i]}
        if args.mode == "3d":
            r["s_zz"] = spec["S_zz"][i]
        rows.append(r)
    path = out / "spectrum.csv"
    path.write_text(records_to_csv(rows, cols), encoding="utf-8")
    return [path]


def cmd_occupancy(cfg, args, out):
    from .oracles import lyapunov_occupancy
    from .spectra import converged_occupancy

    derived, model = _model(cfg, args.mode)
    model.check_stable()
    report, _ = converged_occupancy(model)
    payload = report.to_dict()
    payload["lyapunov"] = lyapunov_occupancy(model)
    return [_write_json(out, "occupancy.json", payload)]


def cmd_brightdark(cfg, args, out):
    from dataclasses import asdict

    from .brightdark import (cooling_rate_bd, geometric_transform, goldilocks_bounds,
                             nongeometric_transform)
    from .params import derive_params

    d = derive_params(cfg)
    geo = geometric_transform(d)
    payload = {
        "geometric": asdict(geo),
        "nongeometric": asdict(nongeometric_transform(d.g_x, d.g_y, d.omega_x, d.omega_y)),
        "nongeometric_literal": asdict(nongeometric_transform(d.g_x, d.g_y, d.omega_x, d.omega_y,
                                                              literal=True)),
        "cooling_rates": asdict(cooling_rate_bd(geo, d)),
        "goldilocks": asdict(goldilocks_bounds(d.kappa, d.Gamma_heat, d.omega_x - d.omega_y)),
    }
    return [_write_json(out, "brightdark.json", payload)]


def cmd_goldilocks(cfg, args, out):
    from dataclasses import asdict

    from .brightdark import goldilocks_bounds
    from .params import derive_params

    d = derive_params(cfg)
    b = goldilocks_bounds(d.kappa, d.Gamma_heat, d.omega_x - d.omega_y)
    payload = asdict(b)
    payload.update(g_mean=d.g_mean, inside=b.contains(d.g_mean), kappa=d.kappa,
                   Gamma_heat=d.Gamma_heat, delta_omega=abs(d.omega_x - d.omega_y))
    return [_write_json(out, "goldilocks.json", payload)]


def cmd_scan(cfg, args, out):
    from .scan import Axis, ScanSpec, run_scan

    spec = ScanSpec(Axis.parse(args.axis1), Axis.parse(args.axis2), mode=args.mode,
                    detuning_rule="fixed" if args.fixed_detuning else "mean",
                    outputs=("n_x", "n_y", "n_2d", "g_x", "g_y", "bounds", "rates"))
    result = run_scan(cfg, spec, threads=args.threads, seed=args.seed)
    path = out / "scan.csv"
    result.write(path)
    prov = _write_json(out, "scan_provenance.json", result.provenance)
    return [path, prov]


COMMANDS = {"derive": cmd_derive, "eigenmodes": cmd_eigenmodes, "spectrum": cmd_spectrum,
            "occupancy": cmd_occupancy, "brightdark": cmd_brightdark, "scan": cmd_scan,
            "goldilocks": cmd_goldilocks}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    from .params import load_config

    try:
        cfg = load_config(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, TrackingError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except InstabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except EquilibriumError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
