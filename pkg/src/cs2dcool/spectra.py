"""Frequency-domain solution of the linear model: displacement and
heterodyne spectra, phonon occupancies and thermometry.

Conventions
-----------
Fourier transforms use X(w) = int e^{iwt} X(t) dt, so the transfer matrix is
T(w) = (-iw - A)^-1 G. Displacement PSDs are symmetrized and refer to the
normalized coordinate x/sqrt(2), i.e. S_xx = 1/2 [T diag(psd) T^H]_xx, so
that the occupancy is n = int S_xx dw/2pi - 1/2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .linear_model import LinearModel

POINTS_PER_HALFWIDTH = 20
POINTS_PER_DECADE = 40
WINDOW_HALFWIDTHS = 10.0
SPAN_FACTOR = 8.0
REL_TOL = 2e-3
TAIL_TOL = 1e-2
MAX_REFINEMENTS = 4


@dataclass
class SpectrumGrid:
    """Spectra sampled on a shared, strictly increasing angular-frequency grid."""

    omega: np.ndarray
    values: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]


@dataclass(frozen=True)
class OccupancyReport:
    """Phonon occupancies obtained from spectra (and optionally heterodyne)."""

    n_x: float
    n_y: float
    n_z: float | None = None
    n_het: float | None = None
    n_b: float | None = None
    n_d: float | None = None
    tolerance: float = float("nan")
    flags: dict = field(default_factory=dict)

    @property
    def n_2d(self) -> float:
        return self.n_x + self.n_y

    def to_dict(self) -> dict:
        out = {"n_x": self.n_x, "n_y": self.n_y, "n_2d": self.n_2d, "n_z": self.n_z,
               "n_het": self.n_het, "n_b": self.n_b, "n_d": self.n_d,
               "tolerance": self.tolerance}
        out.update({f"flag_{k}": v for k, v in self.flags.items()})
        return out


# ------------------------------------------------------------------ helpers

def mechanical_susceptibility(omega, omega_j, gamma):
    """chi_j(w) = w_j / (w_j^2 - w^2 - i w_j gamma), as used in the cooling formulas."""
    omega = np.asarray(omega, dtype=float)
    return omega_j / (omega_j**2 - omega**2 - 1j * omega_j * gamma)


def model_susceptibility(omega, omega_j, gamma):
    """Mechanical response of the quadrature model with damping -gamma/2 on
    both x and p: w_j / (w_j^2 + gamma^2/4 - w^2 - i gamma w)."""
    omega = np.asarray(omega, dtype=float)
    return omega_j / (omega_j**2 + 0.25 * gamma**2 - omega**2 - 1j * gamma * omega)


def optical_response(omega, detuning, kappa):
    """eta(w) = 1/(kappa/2 - i(w + Delta)) - 1/(kappa/2 - i(w - Delta))."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (0.5 * kappa - 1j * (omega + detuning)) - 1.0 / (0.5 * kappa + 1j * (detuning - omega))


def transfer_matrix(model: LinearModel, omega) -> np.ndarray:
    """T(w) for every w, shape (len(w), dim, dim)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n = model.dim
    M = -1j * omega[:, None, None] * np.eye(n)[None] - model.drift[None]
    G = np.broadcast_to(model.noise_gain.astype(complex), (omega.size, n, n))
    try:
        return np.linalg.solve(M, G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "singular response matrix: undamped resonance on the grid") from exc


def _require_stable(model: LinearModel):
    model.check_stable()


# ------------------------------------------------------------------ grid

def resonance_grid(model: LinearModel, density: float = 1.0, span: float | None = None) -> np.ndarray:
    """Symmetric grid resolving every resonance of ``model``.

    A linear window of +-10 half-widths with >= 20 points per half-width is
    placed on each +-|Im lambda|; from the window edges geometric wings at
    40 points per decade of distance run out to the grid edge, and a
    geometric background covers the rest. ``density`` multiplies all point
    counts.
    """
    lam = model.eigenvalues()
    scale = max([abs(v) for v in model.frequencies.values()]
                + [abs(model.meta.get("detuning", 0.0)), model.meta.get("kappa", 0.0)]
                + [float(np.max(np.abs(lam.imag)))])
    W = SPAN_FACTOR * scale if span is None else float(span)
    per_hw = int(math.ceil(POINTS_PER_HALFWIDTH * density))
    per_dec = POINTS_PER_DECADE * density
    pieces = []
    eps = np.finfo(float).eps
    for centre, hw in {(abs(l.imag), abs(l.real)) for l in lam}:
        # keep the finest spacing well above the float resolution at centre
        hw = max(hw, 1e4 * eps * max(centre, 1.0))
        half = WINDOW_HALFWIDTHS * hw
        lin = np.linspace(centre - half, centre + half, 2 * int(WINDOW_HALFWIDTHS) * per_hw + 1)
        pieces.append(lin)
        ndec = max(math.log10(max(W, 2 * half) / half), 0.0)
        nw = max(int(math.ceil(ndec * per_dec)), 2)
        wing = half * np.logspace(0.0, ndec, nw + 1)[1:]
        pieces.append(centre + wing)
        pieces.append(centre - wing)
    # geometric background from W*1e-6 to W plus the origin
    nb = int(math.ceil(6 * per_dec))
    pieces.append(np.logspace(math.log10(W * 1e-6), math.log10(W), nb + 1))
    pos = np.concatenate(pieces + [np.array([0.0])])
    pos = np.abs(pos)
    pos = pos[pos <= W]
    grid = np.unique(np.concatenate([-pos, pos]))
    # drop near-duplicates that would make the trapezoid rule ill-posed
    keep = np.concatenate([[True], np.diff(grid) > 64 * eps * np.maximum(np.abs(grid[1:]), 1.0)])
    return grid[keep]


# ------------------------------------------------------------------ spectra

def _psd_matrix(T: np.ndarray, psd: np.ndarray) -> np.ndarray:
    """Symmetrized covariance spectrum T diag(psd) T^H for each frequency."""
    return np.einsum("wik,k,wjk->wij", T, psd, T.conj())


def transfer_psd(model: LinearModel, omega_grid=None, density: float = 1.0) -> SpectrumGrid:
    """Displacement PSDs S_xx, S_yy (and S_zz in 3D) plus the x-y cross PSD.

    Raises
    ------
    InstabilityError
        If the model has a non-decaying eigenvalue.
    """
    _require_stable(model)
    omega = resonance_grid(model, density) if omega_grid is None else np.asarray(omega_grid, dtype=float)
    T = transfer_matrix(model, omega)
    S = 0.5 * _psd_matrix(T, model.noise_psd)
    ix, iy = model.index("x"), model.index("y")
    values = {"S_xx": S[:, ix, ix].real, "S_yy": S[:, iy, iy].real, "S_xy": S[:, ix, iy]}
    if "z" in model.mode_labels:
        iz = model.index("z")
        values["S_zz"] = S[:, iz, iz].real
    meta = dict(model.meta)
    meta["density"] = density
    return SpectrumGrid(omega=omega, values=values, meta=meta)


def integrate_psd(omega, values):
    """Trapezoid integral of a two-sided PSD with power-law tail corrections.

    Returns ``(integral, tail)`` where ``tail`` is the absolute correction
    added beyond the grid ends.
    """
    omega = np.asarray(omega)
    values = np.asarray(values)
    core = np.trapezoid(values, omega) if hasattr(np, "trapezoid") else np.trapz(values, omega)
    tail = 0.0
    for a, b in ((-1, -2), (0, 1)):
        w1, w2 = abs(omega[a]), abs(omega[b])
        s1, s2 = values[a], values[b]
        if s1 <= 0 or s2 <= 0 or w1 == w2 or w1 == 0:
            continue
        p = math.log(s2 / s1) / math.log(w1 / w2)
        p = max(p, 1.5)
        tail += s1 * w1 / (p - 1.0)
    return core + tail, tail


def occupancy(spectrum: SpectrumGrid) -> OccupancyReport:
    """n_j = int S_jj dw / 2pi - 1/2 for every displacement PSD in ``spectrum``.

    Raises
    ------
    ConvergenceError
        If the tail correction exceeds 1 % of an integral.
    """
    out = {}
    worst = 0.0
    for key in ("S_xx", "S_yy", "S_zz"):
        if key not in spectrum.values:
            continue
        total, tail = integrate_psd(spectrum.omega, spectrum.values[key])
        if total <= 0 or abs(tail) > TAIL_TOL * abs(total):
            raise ConvergenceError(f"{key}: tail correction {tail:.3e} exceeds 1% of {total:.3e}")
        worst = max(worst, abs(tail) / abs(total))
        out[key] = total / (2.0 * math.pi) - 0.5
    tol = spectrum.meta.get("tolerance", worst)
    return OccupancyReport(n_x=out["S_xx"], n_y=out["S_yy"], n_z=out.get("S_zz"),
                           tolerance=tol)


def converged_occupancy(model: LinearModel, rel_tol: float = REL_TOL,
                        max_refinements: int = MAX_REFINEMENTS):
    """Occupancies with grid doubling until every n_j changes by < ``rel_tol``.

    Returns ``(report, spectrum)`` for the finest grid used.
    """
    density = 1.0
    spec = transfer_psd(model, density=density)
    prev = occupancy(spec)
    for _ in range(max_refinements):
        density *= 2.0
        spec = transfer_psd(model, density=density)
        cur = occupancy(spec)
        pairs = [(cur.n_x, prev.n_x), (cur.n_y, prev.n_y)]
        if cur.n_z is not None:
            pairs.append((cur.n_z, prev.n_z))
        # measure change on n + 1/2, the integrated quantity
        change = max(abs(a - b) / (abs(b) + 0.5) for a, b in pairs)
        if change < rel_tol:
            spec.meta["tolerance"] = change
            rep = OccupancyReport(n_x=cur.n_x, n_y=cur.n_y, n_z=cur.n_z, tolerance=change,
                                  flags={"grid_points": int(spec.omega.size)})
            return rep, spec
        prev = cur
    raise ConvergenceError(f"occupancy did not converge: last relative change {change:.3e}")


# ------------------------------------------------------------------ closed form

def closed_form_psd_2d(model: LinearModel, omega) -> dict:
    """S_xx and S_yy of the 2D rotated-frame model via the coupled
    susceptibility equations x = J_xZ Z + x_in, Z = J_Zx x + J_Zy y + Z_in.

    Uses the model's own damping convention (see :func:`model_susceptibility`)
    and J_Zj = -i g_j eta(w). Serves as an independent check of the
    matrix route.
    """
    if model.dim != 6 or model.meta.get("frame") != "rotated":
        raise ValueError("closed form applies to the 2D rotated-frame model")
    omega = np.asarray(omega, dtype=float)
    m = model.meta
    gam, kap, det = m["gamma"], m["kappa"], m["detuning"]
    gx, gy = m["g_x"], m["g_y"]
    wx, wy = model.frequencies["x"], model.frequencies["y"]
    sg, sk = math.sqrt(gam), math.sqrt(kap)
    s_m = 0.5 * gam - 1j * omega
    s_c = 0.5 * kap - 1j * omega
    chi_x = model_susceptibility(omega, wx, gam)
    chi_y = model_susceptibility(omega, wy, gam)
    eta = optical_response(omega, det, kap)
    J_xZ, J_yZ = -2 * gx * chi_x, -2 * gy * chi_y
    J_Zx, J_Zy = -1j * gx * eta, -1j * gy * eta

    nw = omega.size
    zeros = np.zeros(nw, dtype=complex)
    # input contributions written as coefficient rows over (xi_x, xi_px, xi_y, xi_py, xi_Z, xi_P)
    x_in = np.stack([s_m / wx * chi_x * sg, chi_x * sg, zeros, zeros, zeros, zeros], axis=1)
    y_in = np.stack([zeros, zeros, s_m / wy * chi_y * sg, chi_y * sg, zeros, zeros], axis=1)
    den_c = s_c**2 + det**2
    Z_in = np.stack([zeros, zeros, zeros, zeros, s_c * sk / den_c, -det * sk / den_c], axis=1)

    denom = 1.0 - J_Zx * J_xZ - J_Zy * J_yZ
    Z = (J_Zx[:, None] * x_in + J_Zy[:, None] * y_in + Z_in) / denom[:, None]
    x = J_xZ[:, None] * Z + x_in
    y = J_yZ[:, None] * Z + y_in
    psd = model.noise_psd
    return {"S_xx": 0.5 * np.sum(np.abs(x) ** 2 * psd, axis=1),
            "S_yy": 0.5 * np.sum(np.abs(y) ** 2 * psd, axis=1)}


# ------------------------------------------------------------------ heterodyne

def _output_rows(model: LinearModel, T: np.ndarray):
    """Rows mapping the input noise to a_out and a_out^dag at each frequency."""
    n = model.dim
    iZ, iP = model.index("Z_L"), model.index("P_L")
    kap = model.meta["kappa"]
    c_a = np.zeros(n, dtype=complex)
    c_a[iZ], c_a[iP] = 0.5, 0.5j
    c_ad = c_a.conj()
    # a_in = (xi_Z + i xi_P)/2 in the same quadrature convention
    r_a = -math.sqrt(kap) * np.einsum("k,wkj->wj", c_a, T) + c_a[None, :]
    r_ad = -math.sqrt(kap) * np.einsum("k,wkj->wj", c_ad, T) + c_ad[None, :]
    return r_a, r_ad


def output_spectra(model: LinearModel, omega):
    """Non-symmetrized S_{a_out a_out^dag}(w) and S_{a_out^dag a_out}(w)."""
    omega = np.asarray(omega, dtype=float)
    C = model.input_correlation
    r_a, r_ad = _output_rows(model, transfer_matrix(model, omega))
    r_a_m, r_ad_m = _output_rows(model, transfer_matrix(model, -omega))
    S_aad = np.einsum("wi,ij,wj->w", r_a, C, r_ad_m)
    S_ada = np.einsum("wi,ij,wj->w", r_ad, C, r_a_m)
    return S_aad.real, S_ada.real


def cavity_filter(omega, detuning, kappa):
    """L(w) = 1/(kappa/2 - i(w + Delta)): response of the intracavity
    annihilation operator, i.e. the first term of eta."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (0.5 * kappa - 1j * (omega + detuning))


def heterodyne_psd(model: LinearModel, omega_grid=None, lo_offset: float | None = None,
                   g: float | None = None, density: float = 1.0) -> SpectrumGrid:
    """Heterodyne PSD on the LO-offset axis and its rescaled versions.

    S_het(w) = S_{a a^dag}(w) + S_{a^dag a}(-w) is the output-field spectrum
    at the LO beat frequency Delta_LO + w, with the shot-noise floor at 1.

    ``S_het_rescaled`` = (S_het - 1)/(4 kappa g^2 |L(w)|^2) divides out the
    cavity filter seen by each sideband and approximates S_xx + S_yy when
    interference between the modes is neglected. ``S_het_rescaled_eta``
    uses |eta|^2 in place of |L|^2 for comparison. ``g`` defaults to the
    mean of the two transverse couplings.
    """
    _require_stable(model)
    omega = resonance_grid(model, density) if omega_grid is None else np.asarray(omega_grid, dtype=float)
    m = model.meta
    if g is None:
        g = 0.5 * (m["g_x"] + m["g_y"])
    mech_band = max(model.frequencies.values())
    if lo_offset is not None and lo_offset < 4.0 * mech_band:
        warnings.warn(f"lo_offset {lo_offset:.3e} rad/s below 4x the mechanical band: "
                      "heterodyne sidebands overlap", RuntimeWarning, stacklevel=2)
    S_aad, _ = output_spectra(model, omega)
    _, S_ada_rev = output_spectra(model, -omega)
    s_het = S_aad + S_ada_rev
    excess = s_het - 1.0
    kap, det = m["kappa"], m["detuning"]
    with np.errstate(divide="ignore", invalid="ignore"):
        rescaled = excess / (4.0 * kap * g**2 * np.abs(cavity_filter(omega, det, kap)) ** 2)
        rescaled_eta = excess / (4.0 * kap * g**2 * np.abs(optical_response(omega, det, kap)) ** 2)
    if g == 0:
        rescaled = np.zeros_like(s_het)
        rescaled_eta = np.zeros_like(s_het)
    meta = dict(m)
    meta.update(lo_offset=lo_offset, g_rescale=g, density=density,
                coupling_asymmetry=abs(m["g_x"] - m["g_y"]) / max(abs(g), 1e-300))
    return SpectrumGrid(omega=omega,
                        values={"S_het": s_het, "S_het_rescaled": rescaled,
                                "S_het_rescaled_eta": rescaled_eta},
                        meta=meta)


def heterodyne_occupancy(spectrum: SpectrumGrid, n_modes: int = 2, band: float | None = None,
                         key: str = "S_het_rescaled") -> float:
    """Occupancy from the area under a rescaled heterodyne spectrum.

    The rescaled spectrum stands for a sum of ``n_modes`` displacement PSDs,
    each carrying 1/2 of zero-point area, so n = int dw/2pi - n_modes/2.
    ``band`` optionally restricts the integral to |w| <= band.
    """
    w = spectrum.omega
    vals = spectrum.values[key]
    if band is not None:
        sel = np.abs(w) <= band
        w, vals = w[sel], vals[sel]
    core = np.trapezoid(vals, w) if hasattr(np, "trapezoid") else np.trapz(vals, w)
    return core / (2.0 * math.pi) - 0.5 * n_modes


def bright_mode_thermometry(spectrum: SpectrumGrid, g_b: float, gamma_b: float | None = None,
                            gamma_d: float | None = None, band: float | None = None,
                            ratio_limit: float = 3.0):
    """Bright-mode occupancy from the heterodyne spectrum and the dark-mode
    inference n_d ~ n_b.

    ``spectrum`` must come from :func:`heterodyne_psd`. Rescaling by g_b
    instead of g turns the heterodyne excess into S_{x_b x_b}. The inference
    is accepted only if the bright and dark cooling rates are within
    ``ratio_limit`` of each other; otherwise ``n_d_inferred`` is None.

    Returns
    -------
    n_b, n_d_inferred, flags
    """
    g_ref = spectrum.meta["g_rescale"]
    scaled = spectrum.values["S_het_rescaled"] * (g_ref / g_b) ** 2
    n_b = heterodyne_occupancy(SpectrumGrid(spectrum.omega, {"S_het_rescaled": scaled},
                                            spectrum.meta), n_modes=1, band=band)
    flags = {"inference_allowed": False, "rate_ratio": None}
    n_d = None
    if gamma_b is not None and gamma_d is not None:
        lo, hi = sorted((abs(gamma_b), abs(gamma_d)))
        ratio = math.inf if lo == 0 else hi / lo
        flags["rate_ratio"] = ratio
        if ratio <= ratio_limit:
            flags["inference_allowed"] = True
            n_d = n_b
    return n_b, n_d, flags


def bright_displacement_psd(spectrum: SpectrumGrid, u_x: float, u_y: float) -> np.ndarray:
    """S_{x_b x_b} = u^T S u for x_b = u_x x + u_y y, using the cross spectrum."""
    S = spectrum.values
    return (u_x**2 * S["S_xx"] + u_y**2 * S["S_yy"] + 2 * u_x * u_y * S["S_xy"].real)
