import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import constants as sc

import cs2dcool as c
from cs2dcool.params import (bose_occupancy, clausius_mossotti, epstein_damping, HBAR, KB)

TWO_PI = 2 * math.pi


# frozen default-configuration values (regression)
FROZEN = {
    "omega_x": 2118865.126653104,
    "omega_y": 1803289.4694920033,
    "omega_z": 719765.379914488,
    "g_x": 252737.90987325177,
    "g_y": 273961.36593932816,
    "gamma_gas": 0.005208306100971042,
    "z0": 1.2526586958850405e-07,
    "xi": 0.6397643598387194,
    "zR": 1.2489602372824083e-06,
    "E_d": 21232155493.796494,
}


@pytest.mark.parametrize("name", sorted(FROZEN))
def test_frozen_baseline(baseline, name):
    assert getattr(baseline, name) == pytest.approx(FROZEN[name], rel=1e-9)


def test_default_in_physical_band(baseline):
    assert baseline.omega_x / TWO_PI == pytest.approx(337.2e3, rel=2e-3)
    assert baseline.omega_y / TWO_PI == pytest.approx(287.0e3, rel=2e-3)
    assert baseline.g_x / TWO_PI == pytest.approx(40.2e3, rel=3e-3)
    assert baseline.g_y / TWO_PI == pytest.approx(43.6e3, rel=3e-3)


def test_relative_split_default(baseline):
    assert abs(baseline.relative_split - 0.16) <= 0.01


def test_relative_split_near_circular():
    d = c.derive_params(c.ExperimentConfig(waist_x=0.68e-6))
    assert abs(d.relative_split - 0.036) <= 0.005


def test_symmetric_beam_degenerate():
    d = c.derive_params(c.ExperimentConfig(waist_x=0.7e-6, waist_y=0.7e-6))
    assert d.omega_x == d.omega_y


def test_heating_anchor(baseline):
    rate = baseline.gamma_gas * baseline.n_B / TWO_PI
    assert 7.5e3 <= rate <= 30e3


def test_ordering_and_zpf(baseline):
    d = baseline
    assert d.omega_x > d.omega_y
    for zpf, w in ((d.xzpf, d.omega_x), (d.yzpf, d.omega_y), (d.zzpf, d.omega_z)):
        assert math.sqrt(HBAR / (2 * d.mass * w)) == pytest.approx(zpf, rel=1e-12)
    assert d.n_B >= 0 and d.z0 >= 0


@given(st.floats(0.05, math.pi / 2 - 0.05))
def test_coupling_ratio_identity(theta):
    d = c.derive_params(c.ExperimentConfig(theta_tw=theta))
    assert d.g_x / d.g_y == pytest.approx(math.tan(theta) * d.xzpf / d.yzpf, rel=1e-12)


def test_coupling_rates_limits(baseline):
    gx, gy = c.coupling_rates(baseline, math.pi / 2)
    assert gy == pytest.approx(0.0, abs=1e-9 * gx)
    gx, gy = c.coupling_rates(baseline, math.pi / 4)
    assert gx / gy == pytest.approx(math.sqrt(baseline.omega_y / baseline.omega_x), rel=1e-12)


def test_radius_scaling_slope():
    R = np.geomspace(30e-9, 90e-9, 7)
    g = [c.derive_params(c.ExperimentConfig(radius=r)).g_x for r in R]
    slope = np.polyfit(np.log(R), np.log(g), 1)[0]
    assert slope == pytest.approx(1.5, rel=0.01)


def test_power_scaling_ratio():
    g1 = c.derive_params(c.ExperimentConfig(tweezer_power=0.1)).g_y
    g2 = c.derive_params(c.ExperimentConfig(tweezer_power=1.0)).g_y
    assert g2 / g1 == pytest.approx(10 ** 0.25, rel=1e-9)


def test_bose_high_temperature_limit():
    for w in TWO_PI * np.array([1e5, 3e5, 1e6]):
        classical = KB * 300 / (HBAR * w)
        assert bose_occupancy(w, 300.0) == pytest.approx(classical, rel=1e-4)


def test_helpers():
    assert clausius_mossotti(2.1) == pytest.approx(1.1 / 4.1)
    g1 = epstein_damping(1e-4, 300, 50e-9, 1e-18)
    assert epstein_damping(2e-4, 300, 50e-9, 1e-18) == pytest.approx(2 * g1)
    assert HBAR == sc.hbar


def test_recoil_override(baseline):
    d = c.derive_params(c.ExperimentConfig(recoil_override=(1.0, 2.0, 3.0)))
    assert (d.recoil_x, d.recoil_y, d.recoil_z) == (1.0, 2.0, 3.0)
    d0 = c.derive_params(c.ExperimentConfig(recoil_override=0.0))
    assert d0.Gamma_heat == pytest.approx(d0.gamma_gas * d0.n_B, rel=1e-12)
    assert baseline.Gamma_heat > d0.Gamma_heat


@pytest.mark.parametrize("bad", [dict(radius=300e-9), dict(radius=0.27e-6)])
def test_non_rayleigh_rejected(bad):
    with pytest.raises(c.NonRayleighParticleError):
        c.derive_params(c.ExperimentConfig(**bad))


@pytest.mark.parametrize("bad", [dict(tweezer_power=0.0), dict(tweezer_power=-1.0),
                                 dict(relative_permittivity=1.0), dict(theta_tw=4.0),
                                 dict(pressure=0.0)])
def test_invalid_config(bad):
    with pytest.raises(c.ConfigError):
        c.ExperimentConfig(**bad)


def test_config_roundtrip_and_unknown_key(tmp_path):
    cfg = c.ExperimentConfig(radius=80e-9, detuning=-1e6)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert c.load_config(p) == cfg
    p.write_text(json.dumps({"radius": 8e-8, "colour": 1}))
    with pytest.raises(c.ConfigError, match="colour"):
        c.load_config(p)
    p.write_text("{")
    with pytest.raises(c.ConfigError, match="malformed"):
        c.load_config(p)


def test_detuning_default_is_mean(baseline):
    assert baseline.detuning == pytest.approx(-baseline.omega_mean, rel=1e-15)
    assert baseline.lo_offset == pytest.approx(10 * baseline.omega_x)
