"""Lab parameters and every physical rate derived from them.

All quantities are SI. Angular frequencies and rates are in rad/s; the
``*_hz`` helpers used by reports divide by 2*pi.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from scipy import constants as csts

from .errors import ConfigError, NonRayleighParticleError
from . import equilibrium as _eq

HBAR = csts.hbar
KB = csts.k
C = csts.c
EPS0 = csts.epsilon_0

# residual gas taken as N2
GAS_MOLECULE_MASS = 28.0134 * csts.atomic_mass
# Epstein drag coefficient for diffuse reflection
EPSTEIN_DELTA = 1.0 + math.pi / 8.0

# mean-square fraction of a photon kick projected on each tweezer axis:
# dipole pattern gives 2/5 perpendicular to the polarization (x, z) and 1/5
# along it (y); z additionally absorbs the incident photon momentum
RECOIL_AXIS_WEIGHTS = (2.0 / 5.0, 1.0 / 5.0, 2.0 / 5.0 + 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Raw lab parameters. Defaults reproduce the nominal table of the setup."""

    pressure: float = 1e-4  # Pa (1e-6 mbar)
    gas_temperature: float = 300.0
    kappa: float = 2 * math.pi * 193e3
    cavity_length: float = 1.07e-2
    cavity_waist: float = 41.1e-6
    wavelength: float = 1064e-9
    density: float = 2000.0
    radius: float = 71.5e-9
    tweezer_power: float = 0.4
    waist_x: float = 0.600e-6
    waist_y: float = 0.705e-6
    theta_tw: float = math.pi / 4
    phi_tw: float = math.pi / 2
    # None -> -(omega_x + omega_y)/2, recomputed from the trap
    detuning: Optional[float] = None
    # None -> 10x the largest mechanical frequency
    lo_offset: Optional[float] = None
    relative_permittivity: float = 2.1
    recoil_override: Optional[tuple[float, float, float]] = None

    def __post_init__(self):
        positive = ("pressure", "gas_temperature", "kappa", "cavity_length",
                    "cavity_waist", "wavelength", "density", "radius",
                    "waist_x", "waist_y")
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        if not (isinstance(self.tweezer_power, (int, float)) and self.tweezer_power > 0):
            raise ConfigError(f"tweezer_power must be positive, got {self.tweezer_power!r}")
        for name in ("theta_tw", "phi_tw"):
            value = getattr(self, name)
            if not (0.0 <= value <= math.pi):
                raise ConfigError(f"{name} must lie in [0, pi], got {value!r}")
        if not self.relative_permittivity > 1.0:
            raise ConfigError("relative_permittivity must exceed 1")
        if self.detuning is not None and not math.isfinite(self.detuning):
            raise ConfigError("detuning must be finite")
        if self.lo_offset is not None and not self.lo_offset > 0:
            raise ConfigError("lo_offset must be positive")
        if self.recoil_override is not None:
            rec = self.recoil_override
            if isinstance(rec, (int, float)):
                rec = (float(rec),) * 3
            rec = tuple(float(r) for r in rec)
            if len(rec) != 3 or any(r < 0 for r in rec):
                raise ConfigError("recoil_override must be three non-negative rates (x, y, z)")
            object.__setattr__(self, "recoil_override", rec)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        if out["recoil_override"] is not None:
            out["recoil_override"] = list(out["recoil_override"])
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key: {unknown[0]!r}")
        kwargs = {}
        for key, value in data.items():
            if key == "recoil_override":
                kwargs[key] = None if value is None else (
                    tuple(value) if isinstance(value, list) else value)
                continue
            if value is None and key in ("detuning", "lo_offset"):
                kwargs[key] = None
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
            kwargs[key] = float(value)
        return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a JSON file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {str(path)!r}: {exc.msg} (line {exc.lineno})") from exc
    return ExperimentConfig.from_dict(data)


@dataclass(frozen=True)
class DerivedParams:
    """Physical quantities computed from an :class:`ExperimentConfig`."""

    config: ExperimentConfig
    mass: float
    polarizability: float
    eps_c: float
    eps_tw: float
    E_d: float
    k: float
    omega_cav: float
    omega_x: float
    omega_y: float
    omega_z: float
    xzpf: float
    yzpf: float
    zzpf: float
    g_x: float
    g_y: float
    gamma_gas: float
    n_B: float
    n_B_x: float
    n_B_y: float
    n_B_z: float
    recoil_x: float
    recoil_y: float
    recoil_z: float
    Gamma_heat: float
    z0: float
    xi: float
    zR: float
    scattered_power: float
    kappa: float = field(default=0.0)
    detuning: float = field(default=0.0)
    lo_offset: float = field(default=0.0)

    @property
    def theta_tw(self) -> float:
        return self.config.theta_tw

    @property
    def phi_tw(self) -> float:
        return self.config.phi_tw

    @property
    def omega_mean(self) -> float:
        return 0.5 * (self.omega_x + self.omega_y)

    @property
    def relative_split(self) -> float:
        return abs(self.omega_x - self.omega_y) / self.omega_mean

    @property
    def g_mean(self) -> float:
        return 0.5 * (self.g_x + self.g_y)

    def with_detuning(self, detuning: float) -> "DerivedParams":
        return dataclasses.replace(self, detuning=float(detuning),
                                   config=self.config.replace(detuning=float(detuning)))

    def report(self) -> dict[str, Any]:
        """Flat JSON-ready dictionary of every derived field."""
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "config"}
        out["omega_mean"] = self.omega_mean
        out["relative_split"] = self.relative_split
        return out


def bose_occupancy(omega: float, temperature: float) -> float:
    """Mean thermal occupancy 1/(exp(hbar*omega/kT) - 1)."""
    return 1.0 / math.expm1(HBAR * omega / (KB * temperature))


def epstein_damping(pressure, temperature, radius, mass) -> float:
    """Gas damping rate (momentum decay) in the free-molecular regime."""
    mean_speed_factor = math.sqrt(8.0 * GAS_MOLECULE_MASS / (math.pi * KB * temperature))
    return (4.0 * math.pi / 3.0) * EPSTEIN_DELTA * radius**2 * pressure * mean_speed_factor / mass


def clausius_mossotti(eps_r: float) -> float:
    return (eps_r - 1.0) / (eps_r + 2.0)


def coupling_rates(derived: DerivedParams, theta_tw: float) -> tuple[float, float]:
    """Linear optomechanical couplings (g_x, g_y) at polarization angle ``theta_tw``.

    The cavity drive amplitude itself scales with sin(theta_tw), so
    g_x ~ sin^2 and g_y ~ sin*cos.
    """
    E_d = drive_amplitude(derived.polarizability, derived.eps_c, derived.eps_tw, theta_tw)
    g_x = E_d * derived.k * math.sin(theta_tw) * derived.xzpf
    g_y = E_d * derived.k * math.cos(theta_tw) * derived.yzpf
    return g_x, g_y


def drive_amplitude(polarizability, eps_c, eps_tw, theta_tw) -> float:
    return polarizability * eps_c * eps_tw * math.sin(theta_tw) / (2.0 * HBAR)


def derive_params(config: ExperimentConfig) -> DerivedParams:
    """Compute all derived quantities for ``config``.

    Raises
    ------
    NonRayleighParticleError
        If the radius exceeds a quarter wavelength.
    ConfigError
        For non-physical inputs.
    """
    cfg = config
    if cfg.radius > cfg.wavelength / 4.0:
        raise NonRayleighParticleError(
            f"radius {cfg.radius:.3e} m exceeds wavelength/4 = {cfg.wavelength / 4:.3e} m")
    if cfg.tweezer_power <= 0:
        raise ConfigError("tweezer_power must be positive")

    volume = 4.0 / 3.0 * math.pi * cfg.radius**3
    mass = cfg.density * volume
    cm = clausius_mossotti(cfg.relative_permittivity)
    alpha = 3.0 * EPS0 * volume * cm

    k = 2.0 * math.pi / cfg.wavelength
    omega_cav = C * k
    cavity_volume = math.pi * cfg.cavity_waist**2 * cfg.cavity_length / 4.0
    eps_c = math.sqrt(HBAR * omega_cav / (2.0 * EPS0 * cavity_volume))
    eps_tw = math.sqrt(4.0 * cfg.tweezer_power / (cfg.waist_x * cfg.waist_y * math.pi * EPS0 * C))
    zR = math.pi * cfg.waist_x * cfg.waist_y / cfg.wavelength

    # harmonic curvature of the Gaussian-beam potential -alpha*|E|^2/4
    stiffness = alpha * eps_tw**2 / mass
    omega_x = math.sqrt(stiffness / cfg.waist_x**2)
    omega_y = math.sqrt(stiffness / cfg.waist_y**2)
    omega_z = math.sqrt(stiffness / (2.0 * zR**2))

    xzpf = math.sqrt(HBAR / (2.0 * mass * omega_x))
    yzpf = math.sqrt(HBAR / (2.0 * mass * omega_y))
    zzpf = math.sqrt(HBAR / (2.0 * mass * omega_z))

    E_d = drive_amplitude(alpha, eps_c, eps_tw, cfg.theta_tw)
    g_x = E_d * k * math.sin(cfg.theta_tw) * xzpf
    g_y = E_d * k * math.cos(cfg.theta_tw) * yzpf

    gamma = epstein_damping(cfg.pressure, cfg.gas_temperature, cfg.radius, mass)
    omega_mean = 0.5 * (omega_x + omega_y)
    n_B = bose_occupancy(omega_mean, cfg.gas_temperature)
    n_B_x = bose_occupancy(omega_x, cfg.gas_temperature)
    n_B_y = bose_occupancy(omega_y, cfg.gas_temperature)
    n_B_z = bose_occupancy(omega_z, cfg.gas_temperature)

    peak_intensity = 2.0 * cfg.tweezer_power / (math.pi * cfg.waist_x * cfg.waist_y)
    sigma_scatt = 8.0 * math.pi / 3.0 * k**4 * cfg.radius**6 * cm**2
    p_scatt = sigma_scatt * peak_intensity
    if cfg.recoil_override is not None:
        recoil = tuple(cfg.recoil_override)
    else:
        photon_rate = p_scatt / (HBAR * omega_cav)
        recoil = tuple(w * photon_rate * (k * zpf) ** 2
                       for w, zpf in zip(RECOIL_AXIS_WEIGHTS, (xzpf, yzpf, zzpf)))
    Gamma_heat = gamma * n_B + 0.5 * (recoil[0] + recoil[1])

    eq = _eq.solve_axial_equilibrium(
        radius=cfg.radius, k=k, zR=zR, relative_permittivity=cfg.relative_permittivity,
        peak_intensity=peak_intensity)

    detuning = cfg.detuning if cfg.detuning is not None else -omega_mean
    lo_offset = cfg.lo_offset if cfg.lo_offset is not None else 10.0 * max(omega_x, omega_y, omega_z)

    return DerivedParams(
        config=cfg, mass=mass, polarizability=alpha, eps_c=eps_c, eps_tw=eps_tw,
        E_d=E_d, k=k, omega_cav=omega_cav,
        omega_x=omega_x, omega_y=omega_y, omega_z=omega_z,
        xzpf=xzpf, yzpf=yzpf, zzpf=zzpf, g_x=g_x, g_y=g_y,
        gamma_gas=gamma, n_B=n_B, n_B_x=n_B_x, n_B_y=n_B_y, n_B_z=n_B_z,
        recoil_x=recoil[0], recoil_y=recoil[1], recoil_z=recoil[2],
        Gamma_heat=Gamma_heat, z0=eq.z0, xi=eq.xi, zR=zR,
        scattered_power=p_scatt, kappa=cfg.kappa, detuning=float(detuning),
        lo_offset=float(lo_offset),
    )
