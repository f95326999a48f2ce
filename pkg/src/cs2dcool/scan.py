"""Two-parameter sweeps of the 2D/3D model with deterministic, row-major output."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .brightdark import cooling_rate_xy, goldilocks_bounds
from .equilibrium import coupling_table
from .errors import ConfigError, ConvergenceError, EquilibriumError, InstabilityError
from .linear_model import bloch_trajectories, build_model, normal_mode_frequencies
from .params import ExperimentConfig, derive_params
from .spectra import converged_occupancy, heterodyne_psd, transfer_psd

SCAN_HANDLES = ("waist_x", "waist_y", "radius", "tweezer_power", "detuning", "theta_tw")
OUTPUTS = ("n_x", "n_y", "n_2d", "g_x", "g_y", "rates", "bounds")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    points: int

    def __post_init__(self):
        if self.name not in SCAN_HANDLES and self.name not in ExperimentConfig.__dataclass_fields__:
            raise ConfigError(f"unknown scan parameter: {self.name!r}")
        if int(self.points) != self.points or self.points < 2:
            raise ConfigError(f"axis {self.name!r} needs at least 2 points, got {self.points}")
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ConfigError(f"axis {self.name!r} bounds must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, int(self.points))

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """Parse ``name:min:max:points``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"axis must be name:min:max:points, got {text!r}")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ConfigError(f"malformed axis {text!r}: {exc}") from None


@dataclass(frozen=True)
class ScanSpec:
    axis1: Axis
    axis2: Axis
    fixed_overrides: dict = field(default_factory=dict)
    outputs: tuple = ("n_x", "n_y", "n_2d", "g_x", "g_y", "bounds")
    mode: str = "2d"
    detuning_rule: str = "mean"  # 'mean': -Delta = mean mechanical frequency per cell

    def __post_init__(self):
        unknown = set(self.outputs) - set(OUTPUTS)
        if unknown:
            raise ConfigError(f"unknown scan output: {sorted(unknown)[0]!r}")
        if self.mode not in ("2d", "3d"):
            raise ConfigError(f"mode must be 2d or 3d, got {self.mode!r}")
        if self.detuning_rule not in ("mean", "fixed"):
            raise ConfigError(f"detuning_rule must be 'mean' or 'fixed', got {self.detuning_rule!r}")


@dataclass
class ScanResult:
    spec: ScanSpec
    base: ExperimentConfig
    records: list
    provenance: dict

    @property
    def shape(self):
        return (self.spec.axis1.points, self.spec.axis2.points)

    def column(self, key: str) -> np.ndarray:
        """Grid of one quantity, NaN where missing, shape (points1, points2)."""
        vals = [r.get(key) for r in self.records]
        return np.array([np.nan if v is None else float(v) for v in vals]).reshape(self.shape)

    def columns(self) -> list:
        keys: list = []
        for r in self.records:
            for k in r:
                if k not in keys:
                    keys.append(k)
        return keys

    def to_csv(self) -> str:
        return records_to_csv(self.records, self.columns())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def records_to_csv(records, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def config_hash(base: ExperimentConfig, spec: Optional[ScanSpec] = None, seed: int = 0) -> str:
    payload = {"config": base.to_dict(), "seed": int(seed)}
    if spec is not None:
        payload["scan"] = {
            "axis1": [spec.axis1.name, spec.axis1.min, spec.axis1.max, spec.axis1.points],
            "axis2": [spec.axis2.name, spec.axis2.min, spec.axis2.max, spec.axis2.points],
            "fixed": {k: spec.fixed_overrides[k] for k in sorted(spec.fixed_overrides)},
            "outputs": list(spec.outputs), "mode": spec.mode, "rule": spec.detuning_rule,
        }
    blob = json.dumps(payload, sort_keys=True, default=repr).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _cell_config(base: ExperimentConfig, spec: ScanSpec, v1: float, v2: float) -> ExperimentConfig:
    over = dict(spec.fixed_overrides)
    over[spec.axis1.name] = v1
    over[spec.axis2.name] = v2
    if spec.detuning_rule == "mean" and "detuning" not in (spec.axis1.name, spec.axis2.name):
        over["detuning"] = None
    return base.replace(**over)


def evaluate_cell(base: ExperimentConfig, spec: ScanSpec, i: int, j: int) -> dict:
    """One grid cell; failures become flags, never exceptions."""
    v1, v2 = spec.axis1.values[i], spec.axis2.values[j]
    rec = {"i": i, "j": j, spec.axis1.name: float(v1), spec.axis2.name: float(v2),
           "stable": None, "converged": None, "error": ""}
    try:
        derived = derive_params(_cell_config(base, spec, v1, v2))
    except (ConfigError, EquilibriumError) as exc:
        rec["error"] = type(exc).__name__
        return rec
    rec.update(omega_x_hz=derived.omega_x / (2 * math.pi), omega_y_hz=derived.omega_y / (2 * math.pi),
               delta_omega_hz=abs(derived.omega_x - derived.omega_y) / (2 * math.pi),
               detuning_hz=derived.detuning / (2 * math.pi))
    if "g_x" in spec.outputs:
        rec["g_x_hz"] = derived.g_x / (2 * math.pi)
    if "g_y" in spec.outputs:
        rec["g_y_hz"] = derived.g_y / (2 * math.pi)
    rec["g_mean_hz"] = derived.g_mean / (2 * math.pi)
    if "bounds" in spec.outputs:
        b = goldilocks_bounds(derived.kappa, derived.Gamma_heat, derived.omega_x - derived.omega_y)
        rec.update(g_min_hz=b.g_min / (2 * math.pi), g_max_hz=b.g_max / (2 * math.pi),
                   zone_empty=b.empty)
    if "rates" in spec.outputs:
        r = cooling_rate_xy(derived)
        rec.update(gamma_opt_x_hz=r.gamma_opt_x / (2 * math.pi), gamma_opt_y_hz=r.gamma_opt_y / (2 * math.pi))
    model = build_model(derived, coupling_table(derived), mode=spec.mode)
    if model.max_real_part() >= 0:
        rec["stable"] = False
        return rec
    rec["stable"] = True
    try:
        report, _ = converged_occupancy(model)
        rec["converged"] = True
    except ConvergenceError:
        rec["converged"] = False
        return rec
    rec.update(n_x=report.n_x, n_y=report.n_y, n_2d=report.n_2d)
    if spec.mode == "3d":
        rec["n_z"] = report.n_z
    return rec


def _cell_task(args):
    return evaluate_cell(*args)


def run_scan(base: ExperimentConfig, spec: ScanSpec, threads: int = 1, seed: int = 0) -> ScanResult:
    """Evaluate every cell; rows are emitted in row-major (axis1, axis2) order.

    ``ProcessPoolExecutor.map`` returns results in submission order, so the
    output does not depend on ``threads``.
    """
    tasks = [(base, spec, i, j) for i in range(spec.axis1.points) for j in range(spec.axis2.points)]
    if threads <= 1:
        records = [_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_cell_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    prov = {"config_hash": config_hash(base, spec, seed), "version": __version__, "seed": int(seed),
            "shape": [spec.axis1.points, spec.axis2.points]}
    return ScanResult(spec=spec, base=base, records=records, provenance=prov)


def scan_frequencies(base: ExperimentConfig, waist_x: Axis, waist_y: Axis, threads: int = 1,
                     seed: int = 0, mode: str = "2d") -> ScanResult:
    """Occupancy over the tweezer waists, i.e. over the two trap frequencies."""
    spec = ScanSpec(waist_x, waist_y, fixed_overrides={"theta_tw": math.pi / 4}, mode=mode)
    return run_scan(base, spec, threads=threads, seed=seed)


def scan_power_radius(base: ExperimentConfig, power: Axis, radius: Axis, threads: int = 1,
                      seed: int = 0, mode: str = "2d") -> ScanResult:
    """Occupancy over tweezer power and particle radius at theta_tw = pi/4."""
    spec = ScanSpec(power, radius, fixed_overrides={"theta_tw": math.pi / 4}, mode=mode,
                    outputs=("n_x", "n_y", "n_2d", "g_x", "g_y", "bounds", "rates"))
    return run_scan(base, spec, threads=threads, seed=seed)


def zone_couplings(result: ScanResult, threshold: float = 1.0):
    """(g_low, g_high) in rad/s spanned by the cells with n_2d below ``threshold``."""
    n2 = result.column("n_2d")
    g = result.column("g_mean_hz") * 2 * math.pi
    inside = np.isfinite(n2) & (n2 < threshold)
    if not inside.any():
        return None
    return float(g[inside].min()), float(g[inside].max())


# ----------------------------------------------------------------- spectra stack

def bdmodes_config(base: ExperimentConfig) -> ExperimentConfig:
    """Cavity linewidth divided by 10 and trap splitting divided by 4.

    The splitting is reduced by moving waist_x towards waist_y so that the
    mean trap frequency stays approximately fixed.
    """
    d0 = derive_params(base)
    target = abs(d0.omega_x - d0.omega_y) / 4.0
    from scipy.optimize import brentq

    def split(wx):
        d = derive_params(base.replace(waist_x=wx))
        return abs(d.omega_x - d.omega_y) - target

    wx = brentq(split, base.waist_x, base.waist_y, xtol=1e-15)
    return base.replace(waist_x=wx, kappa=base.kappa / 10.0)


def scan_detuning_spectra(config: ExperimentConfig, detuning_grid, omega_grid=None,
                          lo_offset: float | None = None, displacement: bool = False) -> dict:
    """Heterodyne spectra versus detuning with the classical eigenfrequency overlay.

    Returns a dict with ``detuning`` (n_det,), ``omega`` (n_w,), ``S_het``
    (n_det, n_w), ``overlay`` (n_det, 3) conservative normal-mode
    frequencies, ``branch_amplitude`` (n_det, 3) from :func:`branch_weights`,
    and the tracked Bloch trajectories. With
    ``displacement=True`` the position PSDs S_xx, S_yy and their integrated
    occupancies are added.
    """
    derived = derive_params(config)
    table = coupling_table(derived)
    det = np.asarray(detuning_grid, dtype=float)
    if omega_grid is None:
        w_hi = 1.6 * max(derived.omega_x, derived.omega_y)
        omega_grid = np.linspace(-w_hi, w_hi, 2001)
    omega_grid = np.asarray(omega_grid, dtype=float)
    S = np.empty((det.size, omega_grid.size))
    overlay = np.empty((det.size, 3))
    amp = np.full((det.size, 3), np.nan)
    Sxx = np.empty_like(S) if displacement else None
    Syy = np.empty_like(S) if displacement else None
    occ = []
    for k, d in enumerate(det):
        dk = derived.with_detuning(d)
        model = build_model(dk, table)
        overlay[k] = normal_mode_frequencies(dk.omega_x, dk.omega_y, d, dk.g_x, dk.g_y)
        if model.max_real_part() >= 0:
            S[k] = np.nan
            if displacement:
                Sxx[k] = Syy[k] = np.nan
                occ.append((np.nan, np.nan))
            continue
        lo = lo_offset if lo_offset is not None else dk.lo_offset
        het = heterodyne_psd(model, omega_grid, lo_offset=lo, g=derived.g_mean)
        S[k] = het["S_het"]
        amp[k] = branch_weights(model)
        if displacement:
            sp = transfer_psd(model, omega_grid)
            Sxx[k], Syy[k] = sp["S_xx"], sp["S_yy"]
            rep, _ = converged_occupancy(model)
            occ.append((rep.n_x, rep.n_y))
    traj = bloch_trajectories(derived, table, det)
    out = {"detuning": det, "omega": omega_grid, "S_het": S, "overlay": overlay,
           "branch_amplitude": amp, "trajectory": traj}
    if displacement:
        out.update(S_xx=Sxx, S_yy=Syy, occupancy=np.array(occ))
    return out


def branch_weights(model, halfwidths: float = 48.0, points: int = 4001) -> np.ndarray:
    """Integrated excess heterodyne signal of each hybrid branch.

    Each of the three damped eigenmodes (sorted by frequency) is integrated
    over a window of ``halfwidths`` linewidths around both sidebands and the
    larger sideband is kept. Overlapping broad branches share tails, so
    only narrow (e.g. dark) branches are sharply separated.
    """
    lam = np.linalg.eigvals(model.drift)
    lam = lam[lam.imag > 0]
    lam = lam[np.argsort(lam.imag)]
    u = np.tan(np.linspace(-1.0, 1.0, points) * math.atan(halfwidths))
    out = np.empty(lam.size)
    for m, l in enumerate(lam):
        best = -np.inf
        for sgn in (1.0, -1.0):
            w = sgn * l.imag - l.real * u
            excess = heterodyne_psd(model, w)["S_het"] - 1.0
            best = max(best, float(trapezoid(excess, w)) / (2 * math.pi))
        out[m] = best
    return out


def spectra_to_csv(stack: dict) -> str:
    """Long-format CSV: one row per (detuning, omega) with overlay columns."""
    cols = ["detuning_hz", "omega_hz", "s_het", "mode1_hz", "mode2_hz", "mode3_hz"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    two_pi = 2 * math.pi
    for k, d in enumerate(stack["detuning"]):
        ov = stack["overlay"][k] / two_pi
        for m, wv in enumerate(stack["omega"]):
            w.writerow([repr(float(d / two_pi)), repr(float(wv / two_pi)), repr(float(stack["S_het"][k, m])),
                        repr(float(ov[0])), repr(float(ov[1])), repr(float(ov[2]))])
    return buf.getvalue()
