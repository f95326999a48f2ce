"""Bright/dark mechanical modes, their cooling rates and the Goldilocks window.

Two constructions are provided. The geometric one rotates the physical
(x, y) trap coordinates onto the cavity axis; it is exactly canonical and
leaves the dark mode with no optical coupling at any polarization angle.
The non-geometric one rotates the dimensionless quadratures so that the
optical coupling lies entirely on one of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linear_model import symplectic_form
from .params import DerivedParams, HBAR
from .spectra import mechanical_susceptibility, optical_response


@dataclass(frozen=True)
class BrightDarkParams:
    """Frequencies and couplings (rad/s) of the bright/dark representation.

    ``pp_coupling`` tells whether g_bd multiplies x_b x_d only (geometric)
    or x_b x_d + p_b p_d (non-geometric).
    """

    omega_b: float
    omega_d: float
    g_b: float
    g_bd: float
    variant: str
    theta_used: float
    pp_coupling: bool = False
    g_d: float = 0.0


def geometric_transform(derived: DerivedParams, theta_tw: Optional[float] = None) -> BrightDarkParams:
    """Rotate the trap axes by ``theta_tw`` so the bright mode moves along the cavity axis."""
    th = derived.theta_tw if theta_tw is None else theta_tw
    s, c = math.sin(th), math.cos(th)
    wx, wy = derived.omega_x, derived.omega_y
    omega_b = math.sqrt(wx**2 * s**2 + wy**2 * c**2)
    omega_d = math.sqrt(wx**2 * c**2 + wy**2 * s**2)
    g_bd = s * c * (wy**2 - wx**2) / (2.0 * math.sqrt(omega_b * omega_d))
    if theta_tw is None:
        g_x, g_y = derived.g_x, derived.g_y
    else:
        from .params import coupling_rates
        g_x, g_y = coupling_rates(derived, th)
    g_b = g_x * math.sqrt(wx / omega_b) * s + g_y * math.sqrt(wy / omega_b) * c
    g_d = -g_x * math.sqrt(wx / omega_d) * c + g_y * math.sqrt(wy / omega_d) * s
    return BrightDarkParams(omega_b=omega_b, omega_d=omega_d, g_b=g_b, g_bd=g_bd,
                            variant="geometric", theta_used=th, g_d=g_d)


def bright_zpf(derived: DerivedParams, omega_b: float) -> float:
    return math.sqrt(HBAR / (2.0 * derived.mass * omega_b))


def bright_weights(derived: DerivedParams, bd: BrightDarkParams) -> tuple[float, float]:
    """(u_x, u_y) with x_b = u_x x + u_y y for the geometric bright mode."""
    th = bd.theta_used
    bz = bright_zpf(derived, bd.omega_b)
    return math.sin(th) * derived.xzpf / bz, math.cos(th) * derived.yzpf / bz


def nongeometric_transform(g_x, g_y, omega_x, omega_y, literal: bool = False) -> BrightDarkParams:
    """Quadrature rotation with sin(theta_ng) = g_x/G, cos(theta_ng) = g_y/G.

    By default the frequencies and coupling follow from rotating
    omega/4 (x^2 + p^2) directly: omega_b = (g_x^2 w_x + g_y^2 w_y)/G^2 and
    g_bd = (w_y - w_x) g_x g_y / (2 G^2), coupling x_b x_d + p_b p_d.
    ``literal=True`` returns the literal closed form instead, in which
    omega_b^2 equals that weighted mean and g_bd carries 2G in the
    denominator; it is not dimensionally consistent and is kept for
    comparison only.
    """
    G2 = g_x**2 + g_y**2
    if G2 == 0:
        raise ValueError("bright/dark decomposition needs a non-zero coupling")
    G = math.sqrt(G2)
    theta_ng = math.atan2(g_x, g_y)
    mean_b = (g_x**2 * omega_x + g_y**2 * omega_y) / G2
    mean_d = (g_x**2 * omega_y + g_y**2 * omega_x) / G2
    if literal:
        return BrightDarkParams(omega_b=math.sqrt(mean_b), omega_d=math.sqrt(mean_d), g_b=G,
                                g_bd=(omega_y - omega_x) * g_x * g_y / (2.0 * G),
                                variant="nongeometric_literal", theta_used=theta_ng,
                                pp_coupling=True)
    return BrightDarkParams(omega_b=mean_b, omega_d=mean_d, g_b=G,
                            g_bd=0.5 * (omega_y - omega_x) * g_x * g_y / G2,
                            variant="nongeometric", theta_used=theta_ng, pp_coupling=True)


def taylor_couplings(g_x, g_y, omega_x, omega_y) -> tuple[float, float]:
    """Leading small-splitting expansion of the geometric (g_bd, g_b)."""
    G = math.sqrt(g_x**2 + g_y**2)
    g_bd = g_x * g_y * (omega_y - omega_x) / G**2
    g_b = G + (g_y**2 - g_x**2) * (omega_y - omega_x) / (4.0 * omega_x * G)
    return g_bd, g_b


def bd_hamiltonian(bd: BrightDarkParams, detuning: float) -> np.ndarray:
    """Hm for (x_b, p_b, x_d, p_d, Z_L, P_L) in the 1/2 X^T Hm X convention."""
    Hm = np.zeros((6, 6))
    Hm[0, 0] = Hm[1, 1] = 0.5 * bd.omega_b
    Hm[2, 2] = Hm[3, 3] = 0.5 * bd.omega_d
    Hm[4, 4] = Hm[5, 5] = -0.5 * detuning
    Hm[0, 2] = Hm[2, 0] = bd.g_bd
    if bd.pp_coupling:
        Hm[1, 3] = Hm[3, 1] = bd.g_bd
    Hm[0, 4] = Hm[4, 0] = bd.g_b
    Hm[2, 4] = Hm[4, 2] = bd.g_d
    return Hm


def xy_hamiltonian(omega_x, omega_y, detuning, g_x, g_y) -> np.ndarray:
    """Hm for (x, p_x, y, p_y, Z_L, P_L), same convention as :func:`bd_hamiltonian`."""
    Hm = np.zeros((6, 6))
    Hm[0, 0] = Hm[1, 1] = 0.5 * omega_x
    Hm[2, 2] = Hm[3, 3] = 0.5 * omega_y
    Hm[4, 4] = Hm[5, 5] = -0.5 * detuning
    Hm[0, 4] = Hm[4, 0] = g_x
    Hm[2, 4] = Hm[4, 2] = g_y
    return Hm


def conservative_frequencies(Hm: np.ndarray) -> np.ndarray:
    """Sorted positive normal-mode frequencies of dX/dt = 2 J Hm X."""
    lam = np.linalg.eigvals(2.0 * symplectic_form(Hm.shape[0] // 2) @ Hm)
    return np.sort(lam.imag[lam.imag > 0])


# ---------------------------------------------------------------- cooling rates

@dataclass(frozen=True)
class CoolingRates:
    """Optomechanical cooling rates (rad/s); ``approx_*`` only at theta_tw = pi/4."""

    gamma_opt_x: float
    gamma_opt_y: float
    gamma_opt_b: float = float("nan")
    gamma_opt_d: float = float("nan")
    approx_b: Optional[float] = None
    approx_d: Optional[float] = None


def _pair_rate(g_j, g_k, omega_j, omega_k, gamma, detuning, kappa) -> float:
    eta = optical_response(omega_j, detuning, kappa)
    chi_k = mechanical_susceptibility(omega_j, omega_k, gamma)
    return float(np.imag(2j * g_j**2 * eta / (1.0 - 2j * g_k**2 * chi_k * eta)))


def cooling_rate_pair(g_x, g_y, omega_x, omega_y, gamma, detuning, kappa) -> tuple[float, float]:
    """(Gamma_opt_x, Gamma_opt_y) from the self-energy including the other mode."""
    return (_pair_rate(g_x, g_y, omega_x, omega_y, gamma, detuning, kappa),
            _pair_rate(g_y, g_x, omega_y, omega_x, gamma, detuning, kappa))


def cooling_rate_xy(derived: DerivedParams, detuning: Optional[float] = None) -> CoolingRates:
    det = derived.detuning if detuning is None else detuning
    gx_rate, gy_rate = cooling_rate_pair(derived.g_x, derived.g_y, derived.omega_x,
                                         derived.omega_y, derived.gamma_gas, det, derived.kappa)
    return CoolingRates(gamma_opt_x=gx_rate, gamma_opt_y=gy_rate)


def bd_rates(bd: BrightDarkParams, gamma, detuning, kappa) -> tuple[float, float]:
    """Exact bright and dark self-energy rates from the J coefficients."""
    wb, wd, gb, gbd = bd.omega_b, bd.omega_d, bd.g_b, bd.g_bd
    chi_d_b = mechanical_susceptibility(wb, wd, gamma)
    eta_b = optical_response(wb, detuning, kappa)
    rate_b = np.imag(2j * gb**2 * eta_b + 4.0 * gbd**2 * chi_d_b)
    chi_b_d = mechanical_susceptibility(wd, wb, gamma)
    eta_d = optical_response(wd, detuning, kappa)
    rate_d = np.imag(4.0 * gbd**2 * chi_b_d / (1.0 - 2j * gb**2 * chi_b_d * eta_d))
    return float(rate_b), float(rate_d)


def cooling_rate_bd(bd: BrightDarkParams, derived: DerivedParams,
                    detuning: Optional[float] = None) -> CoolingRates:
    """Bright/dark rates plus the x/y rates; pi/4 closed forms when applicable.

    At theta_tw = pi/4 the geometric omega_b equals omega_d, so the dark
    susceptibility in the exact bright rate is evaluated on resonance and
    its gamma-limited imaginary part dominates; the closed form 4 g_b^2/kappa
    describes the optical channel only.
    """
    det = derived.detuning if detuning is None else detuning
    xy = cooling_rate_xy(derived, det)
    rate_b, rate_d = bd_rates(bd, derived.gamma_gas, det, derived.kappa)
    approx_b = approx_d = None
    if math.isclose(bd.theta_used, math.pi / 4, rel_tol=0, abs_tol=1e-9) and bd.variant == "geometric":
        approx_b = 4.0 * bd.g_b**2 / derived.kappa
        approx_d = bd.g_bd**2 * derived.kappa / bd.g_b**2 if bd.g_b else 0.0
    return CoolingRates(gamma_opt_x=xy.gamma_opt_x, gamma_opt_y=xy.gamma_opt_y,
                        gamma_opt_b=rate_b, gamma_opt_d=rate_d,
                        approx_b=approx_b, approx_d=approx_d)


@dataclass(frozen=True)
class GoldilocksBounds:
    g_min: float
    g_max: float
    empty: bool

    def contains(self, g: float) -> bool:
        return (not self.empty) and self.g_min <= g <= self.g_max


def goldilocks_bounds(kappa: float, Gamma_heat: float, delta_omega: float) -> GoldilocksBounds:
    """Coupling window sqrt(kappa Gamma/4) <= g <= sqrt(kappa/(16 Gamma)) |delta_omega|."""
    if kappa <= 0 or Gamma_heat < 0:
        raise ValueError("kappa must be positive and Gamma_heat non-negative")
    g_min = math.sqrt(kappa * Gamma_heat / 4.0)
    g_max = math.inf if Gamma_heat == 0 else math.sqrt(kappa / (16.0 * Gamma_heat)) * abs(delta_omega)
    return GoldilocksBounds(g_min=g_min, g_max=g_max, empty=g_min > g_max)
