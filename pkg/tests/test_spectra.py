import math
import warnings

import numpy as np
import pytest

import cs2dcool as c
from cs2dcool.brightdark import bright_weights, cooling_rate_bd, geometric_transform
from cs2dcool.linear_model import build_model, synthetic_model
from cs2dcool.oracles import lyapunov_occupancy
from cs2dcool.spectra import (SpectrumGrid, bright_displacement_psd, bright_mode_thermometry,
                              closed_form_psd_2d, converged_occupancy, heterodyne_occupancy,
                              heterodyne_psd, integrate_psd, mechanical_susceptibility,
                              occupancy, optical_response, resonance_grid, transfer_psd)

from conftest import NO_RECOIL, thermometry_config

TWO_PI = 2 * math.pi


def _model(cfg, mode="2d", **kw):
    d = c.derive_params(cfg)
    return d, build_model(d, c.coupling_table(d), mode, **kw)


def random_stable_model(rng):
    w = TWO_PI * 300e3
    while True:
        m = synthetic_model(
            omega_x=rng.uniform(0.6, 1.4) * w, omega_y=rng.uniform(0.6, 1.4) * w,
            detuning=-rng.uniform(0.5, 1.5) * w, kappa=rng.uniform(0.1, 1.0) * w,
            gamma=10 ** rng.uniform(-4, -1) * w, g_x=rng.uniform(0, 0.15) * w,
            g_y=rng.uniform(0, 0.15) * w, n_x=10 ** rng.uniform(-1, 3), n_y=10 ** rng.uniform(-1, 3))
        if m.max_real_part() < 0:
            return m


def test_thermal_equilibrium_g0():
    d, m = _model(c.ExperimentConfig(recoil_override=NO_RECOIL), couplings_scale=0.0)
    rep, _ = converged_occupancy(m)
    assert rep.n_x == pytest.approx(d.n_B_x, rel=0.01)
    assert rep.n_y == pytest.approx(d.n_B_y, rel=0.01)


def test_susceptibility_helpers():
    w, g = 2.0e6, 1e-2
    assert mechanical_susceptibility(0.0, w, g) * w == pytest.approx(1.0, rel=1e-8)
    assert abs(optical_response(0.0, 0.0, 1e6)) == pytest.approx(0.0, abs=1e-18)


def test_lyapunov_oracle_random():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        m = random_stable_model(rng)
        rep, _ = converged_occupancy(m)
        ly = lyapunov_occupancy(m)
        assert rep.n_x == pytest.approx(ly["n_x_position"], rel=5e-3)
        assert rep.n_y == pytest.approx(ly["n_y_position"], rel=5e-3)


def test_lorentzian_free_oscillator():
    w0, gam, nB = TWO_PI * 200e3, 50.0, 1234.0
    m = synthetic_model(w0, 1.3 * w0, -w0, 1e5, gam, 0.0, 0.0, n_x=nB, n_y=nB)
    grid = resonance_grid(m)
    chi = mechanical_susceptibility(grid, w0, gam)
    # symmetric-damping Lorentzian of x/sqrt2 driven by 2n+1 white noise
    S = 0.5 * gam * (2 * nB + 1) * np.abs(w0 / (w0**2 - grid**2 - 1j * grid * gam)) ** 2 * \
        (1 + (grid / w0) ** 2)
    rep = occupancy(SpectrumGrid(grid, {"S_xx": S, "S_yy": S}, {}))
    assert rep.n_x == pytest.approx(nB, rel=5e-3)
    assert np.all(np.isfinite(chi))


def test_goldilocks_point(goldilocks):
    m = build_model(goldilocks, c.coupling_table(goldilocks))
    rep, _ = converged_occupancy(m)
    assert rep.n_2d < 1
    assert rep.n_2d == rep.n_x + rep.n_y


def test_span_doubling(goldilocks):
    m = build_model(goldilocks, c.coupling_table(goldilocks))
    n1 = occupancy(transfer_psd(m, resonance_grid(m, density=2.0)))
    base = resonance_grid(m, density=2.0)
    n2 = occupancy(transfer_psd(m, resonance_grid(m, density=2.0, span=2 * base.max())))
    assert n2.n_x == pytest.approx(n1.n_x, rel=2e-3)
    assert n2.n_y == pytest.approx(n1.n_y, rel=2e-3)


def test_grid_resolves_resonances(goldilocks):
    m = build_model(goldilocks, c.coupling_table(goldilocks))
    grid = resonance_grid(m)
    assert np.all(np.diff(grid) > 0)
    assert grid.max() >= 8 * max(goldilocks.omega_x, abs(goldilocks.detuning))
    for lam in m.eigenvalues():
        hw = -lam.real
        near = np.abs(grid - lam.imag) <= hw
        assert near.sum() >= 2 * 20


def test_positivity_and_closed_form(goldilocks):
    m = build_model(goldilocks, c.coupling_table(goldilocks))
    w = resonance_grid(m)
    sp = transfer_psd(m, w)
    assert np.all(sp["S_xx"] >= 0) and np.all(sp["S_yy"] >= 0)
    cf = closed_form_psd_2d(m, w)
    np.testing.assert_allclose(cf["S_xx"], sp["S_xx"], rtol=1e-9)
    np.testing.assert_allclose(cf["S_yy"], sp["S_yy"], rtol=1e-9)


def test_tail_non_convergence():
    w = np.linspace(-1e3, 1e3, 2001)
    S = 1.0 / (1 + (w / 1e3) ** 2)
    with pytest.raises(c.ConvergenceError):
        occupancy(SpectrumGrid(w, {"S_xx": S, "S_yy": S}, {}))
    val, tail = integrate_psd(w, S)
    assert tail > 0.01 * val


def test_unstable_model_rejected(baseline):
    blue = baseline.with_detuning(-baseline.detuning)
    m = build_model(blue, c.coupling_table(blue))
    with pytest.raises(c.InstabilityError):
        transfer_psd(m)
    with pytest.raises(c.InstabilityError):
        heterodyne_psd(m)


def test_heterodyne_vacuum_flat(baseline):
    m = build_model(baseline, c.coupling_table(baseline), couplings_scale=0.0)
    h = heterodyne_psd(m, np.linspace(-5e6, 5e6, 4001))
    assert np.max(np.abs(h["S_het"] - 1.0)) < 1e-9


def test_heterodyne_lo_warning(baseline):
    m = build_model(baseline, c.coupling_table(baseline))
    with pytest.warns(RuntimeWarning, match="lo_offset"):
        heterodyne_psd(m, np.linspace(-1e6, 1e6, 11), lo_offset=baseline.omega_x)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        heterodyne_psd(m, np.linspace(-1e6, 1e6, 11), lo_offset=baseline.lo_offset)


def _fig5(near_circular):
    d, m = _model(thermometry_config(near_circular))
    rep, sp = converged_occupancy(m)
    return d, m, rep, sp, heterodyne_psd(m, sp.omega)


def test_heterodyne_thermometry_goldilocks():
    _, _, rep, _, h = _fig5(False)
    assert abs(heterodyne_occupancy(h) - rep.n_2d) / rep.n_2d <= 0.3


def test_near_circular_hot():
    rep_g = _fig5(False)[2]
    rep_c = _fig5(True)[2]
    assert rep_c.n_2d > 10 * rep_g.n_2d


def test_bright_mode_psd_relation():
    d, m, rep, sp, h = _fig5(False)
    bd = geometric_transform(d)
    assert abs(bd.g_b) == pytest.approx(math.sqrt(2) * d.g_mean, rel=0.02)
    Sb = bright_displacement_psd(sp, *bright_weights(d, bd))
    n_b = integrate_psd(sp.omega, Sb)[0] / TWO_PI - 0.5
    assert n_b == pytest.approx(rep.n_2d / 2, rel=0.3)
    n_b_het, _, _ = bright_mode_thermometry(h, abs(bd.g_b))
    assert n_b_het == pytest.approx(n_b, rel=0.05)


def test_bright_thermometry_total_goldilocks():
    d, m, rep, sp, h = _fig5(False)
    bd = geometric_transform(d)
    n_b, _, _ = bright_mode_thermometry(h, abs(bd.g_b))
    # n_x + n_y ~ n_b + n_d with n_d ~ n_b
    assert abs(2 * n_b - rep.n_2d) / rep.n_2d <= 0.3


@pytest.mark.xfail(strict=True, reason="pi/4 rate estimates differ by 4.1x at the thermometry point, "
                                       "beyond the 3x inference threshold")
def test_bright_inference_allowed_goldilocks():
    d, m, rep, sp, h = _fig5(False)
    bd = geometric_transform(d)
    r = cooling_rate_bd(bd, d)
    _, n_d, flags = bright_mode_thermometry(h, abs(bd.g_b), r.approx_b, r.approx_d)
    assert flags["inference_allowed"] and n_d is not None


def test_degenerate_trap_inference_refused():
    cfg = c.ExperimentConfig(waist_x=0.7e-6, waist_y=0.7e-6, recoil_override=NO_RECOIL)
    d, m = _model(cfg)
    bd = geometric_transform(d)
    r = cooling_rate_bd(bd, d)
    h = heterodyne_psd(m, resonance_grid(m))
    n_b, n_d, flags = bright_mode_thermometry(h, abs(bd.g_b), r.approx_b, r.approx_d)
    assert n_d is None and not flags["inference_allowed"] and math.isfinite(n_b)


def test_three_dimensional_occupancy(baseline):
    d = c.derive_params(c.ExperimentConfig(recoil_override=NO_RECOIL))
    m = build_model(d, c.coupling_table(d), "3d")
    rep, _ = converged_occupancy(m)
    ly = lyapunov_occupancy(m)
    assert rep.n_z == pytest.approx(ly["n_z_position"], rel=5e-3)
    assert rep.n_x == pytest.approx(ly["n_x_position"], rel=5e-3)
