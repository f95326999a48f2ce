"""Axial equilibrium under the scattering force, mean cavity field and the
quadratic coupling table in the rotated optical frame.

The tweezer light pushes the particle downstream along z until the
gradient force balances the scattering force. The resulting offset z0 sets
the optical phase xi seen by the particle, which mixes the amplitude and
phase quadratures of the cavity field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from scipy import constants as csts
from scipy.optimize import brentq

from .errors import EquilibriumError

if TYPE_CHECKING:  # pragma: no cover
    from .params import DerivedParams

BRACKET_FRACTION = 0.99
XTOL = 1e-15


@dataclass(frozen=True)
class EquilibriumSolution:
    """Axial rest position of the particle.

    ``method`` is ``"closed_form"`` only when the small-offset formula was
    requested and z0/zR < 0.1; otherwise the root-found value is returned.
    ``z0_closed_form`` always holds the small-offset estimate for comparison.
    """

    z0: float
    xi: float
    method: str
    residual_force: float
    z0_closed_form: float
    force_scale: float


def closed_form_offset(radius, k, zR, relative_permittivity) -> float:
    """Small-offset equilibrium ((eps-1)/(eps+2)) * (2 k^4 zR^2 / 3) * R^3."""
    beta = (relative_permittivity - 1.0) / (relative_permittivity + 2.0)
    return beta * 2.0 * k**4 * zR**2 / 3.0 * radius**3


def axial_forces(z, radius, k, zR, relative_permittivity, peak_intensity):
    """Gradient and scattering force (N) on the beam axis at offset ``z``.

    The gradient force is written with its restoring sign (negative for
    z > 0); the scattering force pushes along +z.
    """
    eps0, c = csts.epsilon_0, csts.c
    beta = (relative_permittivity - 1.0) / (relative_permittivity + 2.0)
    alpha = 4.0 * math.pi * eps0 * radius**3 * beta
    sigma = 8.0 * math.pi / 3.0 * k**4 * radius**6 * beta**2
    lorentz = 1.0 / (1.0 + (z / zR) ** 2)
    f_grad = -alpha * peak_intensity / (eps0 * c) * z / zR**2 * lorentz**2
    f_scatt = sigma * peak_intensity / c * lorentz
    return f_grad, f_scatt


def gouy_phase(z0, k, zR) -> float:
    return k * z0 - math.atan(z0 / zR)


def solve_axial_equilibrium(radius, k, zR, relative_permittivity, peak_intensity,
                            prefer_closed_form=False) -> EquilibriumSolution:
    """Root-find the axial balance point on [0, 0.99 zR].

    Dividing the force balance by the common factors leaves
    z / (1 + z^2/zR^2) = z_cf, with z_cf the closed-form offset, so the
    exact root sits above the closed form by the factor 1 + (z0/zR)^2.
    """
    z_cf = closed_form_offset(radius, k, zR, relative_permittivity)
    upper = BRACKET_FRACTION * zR

    def reduced(z):
        return z / (1.0 + (z / zR) ** 2) - z_cf

    if reduced(upper) <= 0.0:
        raise EquilibriumError(
            f"no axial equilibrium: scattering offset {z_cf:.3e} m exceeds the maximal "
            f"restoring reach {upper / (1 + BRACKET_FRACTION**2):.3e} m (radius {radius:.3e} m)")
    z0 = brentq(reduced, 0.0, upper, xtol=XTOL, rtol=1e-15, maxiter=200)

    f_grad, f_scatt = axial_forces(z0, radius, k, zR, relative_permittivity, peak_intensity)
    _, f_scatt0 = axial_forces(0.0, radius, k, zR, relative_permittivity, peak_intensity)
    method = "root_find"
    if prefer_closed_form and z_cf / zR < 0.1:
        z0, method = z_cf, "closed_form"
        f_grad, f_scatt = axial_forces(z0, radius, k, zR, relative_permittivity, peak_intensity)
    return EquilibriumSolution(
        z0=z0, xi=gouy_phase(z0, k, zR), method=method,
        residual_force=abs(f_grad + f_scatt), z0_closed_form=z_cf,
        force_scale=abs(f_scatt0),
    )


def axial_equilibrium(derived: "DerivedParams", prefer_closed_form=False) -> EquilibriumSolution:
    """Axial equilibrium for a derived parameter set."""
    cfg = derived.config
    peak_intensity = 2.0 * cfg.tweezer_power / (math.pi * cfg.waist_x * cfg.waist_y)
    return solve_axial_equilibrium(cfg.radius, derived.k, derived.zR,
                                   cfg.relative_permittivity, peak_intensity,
                                   prefer_closed_form=prefer_closed_form)


def mean_quadratures(E_d, phi_tw, detuning, kappa, xi=0.0):
    """Stationary intracavity quadratures (Z0^xi, P0^xi) for a coherent drive.

    At xi = 0 these are the amplitude and phase quadratures of the mean field
    2*alpha with alpha = -E_d cos(phi) / (Delta - i kappa/2) up to phase
    conventions; a nonzero xi rotates them.
    """
    denom = detuning**2 + kappa**2 / 4.0
    pref = -E_d * math.cos(phi_tw) / denom
    Z0 = pref * (2.0 * detuning * math.cos(xi) - kappa * math.sin(xi))
    P0 = pref * (2.0 * detuning * math.sin(xi) + kappa * math.cos(xi))
    return Z0, P0


def rotated_mean_quadratures(derived: "DerivedParams", xi: float):
    """Mean quadratures of the cavity field in the frame rotated by ``xi``."""
    if not derived.kappa > 0:
        raise ValueError("kappa must be positive")
    return mean_quadratures(derived.E_d, derived.phi_tw, derived.detuning, derived.kappa, xi)


@dataclass(frozen=True)
class CouplingTable:
    """Linear and quadratic couplings (rad/s) after expanding the dipole
    potential about the equilibrium, in the optical frame rotated by ``xi``.

    The unrotated mechanical-to-cavity couplings ``g_xZ``, ``g_yZ``, ``g_zP``
    are kept for reference; in the rotated frame x and y couple only to the
    amplitude quadrature and z only to the phase quadrature.
    """

    xi: float
    g_xZ: float
    g_yZ: float
    g_zP: float
    g_xZ_xi: float
    g_xP_xi: float
    g_yZ_xi: float
    g_yP_xi: float
    g_zZ_xi: float
    g_zP_xi: float
    g_xy_xi: float
    g_xz_xi: float
    g_yz_xi: float
    Z0_xi: float
    P0_xi: float


def coupling_table(derived: "DerivedParams", xi: float | None = None) -> CouplingTable:
    """Evaluate every coupling at phase ``xi`` (defaults to the equilibrium one)."""
    if xi is None:
        xi = derived.xi
    th, ph, k, E_d = derived.theta_tw, derived.phi_tw, derived.k, derived.E_d
    sth, cth, sph, cph = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
    Z0_xi, P0_xi = rotated_mean_quadratures(derived, xi)

    g_xZ = E_d * k * sth * sph * derived.xzpf
    g_yZ = E_d * k * cth * sph * derived.yzpf
    g_zP = -E_d * k * cph * derived.zzpf
    cx, sx = math.cos(xi), math.sin(xi)
    k2 = k * k
    return CouplingTable(
        xi=xi, g_xZ=g_xZ, g_yZ=g_yZ, g_zP=g_zP,
        g_xZ_xi=g_xZ * cx, g_xP_xi=g_xZ * sx,
        g_yZ_xi=g_yZ * cx, g_yP_xi=g_yZ * sx,
        g_zZ_xi=-g_zP * sx, g_zP_xi=g_zP * cx,
        g_xy_xi=E_d * k2 * Z0_xi * sth * cth * cph * derived.xzpf * derived.yzpf,
        g_xz_xi=E_d * k2 * P0_xi * sth * sph * derived.xzpf * derived.zzpf,
        g_yz_xi=E_d * k2 * P0_xi * cth * sph * derived.yzpf * derived.zzpf,
        Z0_xi=Z0_xi, P0_xi=P0_xi,
    )
