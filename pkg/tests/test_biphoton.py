import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cavityspdc.biphoton import (
    BiphotonParams,
    WindowError,
    bandwidth,
    conditional_density,
    correlated_rate,
    density,
    density_cdf,
    g2,
    generated_brightness,
    kappa_from_rate,
    positive_mass,
    rate_from_pump,
    waveform_fwhm,
)

from conftest import GAMMA_I, GAMMA_S

P = BiphotonParams.from_decay_times(20.7e-9, 24.4e-9, 2868.0)


def test_g2_floor_far_from_zero():
    assert g2(1.0, P) == pytest.approx(P.pair_rate**2, rel=1e-12)
    assert g2(-1.0, P) == pytest.approx(P.pair_rate**2, rel=1e-12)


def test_g2_continuous_at_zero():
    assert g2(-1e-18, P) == pytest.approx(g2(1e-18, P), rel=1e-9)
    assert g2(0.0, P) == pytest.approx(g2(1e-18, P), rel=1e-9)


def test_g2_e_folding():
    R2 = P.pair_rate**2
    assert g2(-20.7e-9, P) - R2 == pytest.approx((g2(0.0, P) - R2) / math.e, rel=1e-9)


@given(tau=st.floats(-1e-6, 1e-6))
def test_g2_above_floor(tau):
    assert g2(tau, P) >= P.pair_rate**2


def test_conditional_density_normalised():
    w = conditional_density(P)
    lo, hi = w.bounds
    total = quad(lambda t: float(density(t, P.gamma_s, P.gamma_i, w.bounds)), lo, 0, epsabs=0, epsrel=1e-12)[0]
    total += quad(lambda t: float(density(t, P.gamma_s, P.gamma_i, w.bounds)), 0, hi, epsabs=0, epsrel=1e-12)[0]
    assert total == pytest.approx(1.0, rel=1e-9)
    assert np.all(w.values >= 0)
    assert np.allclose(np.diff(w.tau), w.step, rtol=1e-9)
    assert 0.0 in w.tau


def test_small_window_raises_with_suggestion():
    with pytest.raises(WindowError, match="use at least"):
        conditional_density(P, bounds=(-20e-9, 20e-9))


def test_symmetric_rates_have_zero_median():
    assert float(density_cdf(0.0, 1e8, 1e8)) == pytest.approx(0.5, abs=1e-15)


def test_positive_mass():
    assert positive_mass(GAMMA_S, GAMMA_I) == pytest.approx(24.4 / (20.7 + 24.4), rel=1e-12)
    assert positive_mass(GAMMA_S, GAMMA_I) == pytest.approx(0.5410, abs=5e-5)
    upper = quad(lambda t: float(density(t, GAMMA_S, GAMMA_I)), 0, 60 / GAMMA_I, epsabs=0, epsrel=1e-12)[0]
    assert upper == pytest.approx(positive_mass(GAMMA_S, GAMMA_I), rel=1e-8)


def test_reported_bandwidth():
    assert bandwidth(GAMMA_S, GAMMA_I) == pytest.approx(4.5e6, abs=0.1e6)


@given(g=st.floats(1e6, 1e10))
def test_equal_rate_bandwidth(g):
    assert bandwidth(g, g) == pytest.approx(g * math.sqrt(math.sqrt(2) - 1) / (2 * math.pi), rel=1e-9)


@given(a=st.floats(1e-3, 1e3), gs=st.floats(1e6, 1e9), gi=st.floats(1e6, 1e9))
def test_bandwidth_homogeneous_and_symmetric(a, gs, gi):
    assert bandwidth(a * gs, a * gi) == pytest.approx(a * bandwidth(gs, gi), rel=1e-9)
    assert bandwidth(gs, gi) == pytest.approx(bandwidth(gi, gs), rel=1e-12)


def test_reported_brightness():
    b = generated_brightness(2868, 0.63, 0.63, 0.27, 0.54, 30e-6, 4.5e6)
    assert b == pytest.approx(3.67e5, rel=0.02)


def test_brightness_identity_and_linearity():
    assert generated_brightness(1234.0, 1, 1, 1, 1, 1e-3, 1e6) == pytest.approx(1234.0, rel=1e-12)
    a = generated_brightness(100.0, 0.5, 0.5, 0.4, 0.5, 1e-3, 1e6)
    b = generated_brightness(100.0, 0.5, 0.5, 0.2, 0.5, 1e-3, 1e6)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_brightness_zero_efficiency():
    with pytest.raises(ZeroDivisionError):
        generated_brightness(100.0, 0.0, 0.5, 0.5, 0.5, 1e-3, 1e6)


def test_pump_scaling():
    cal = 1.65e9
    a = BiphotonParams.from_pump(30e-6, cal, GAMMA_S, GAMMA_I)
    b = BiphotonParams.from_pump(60e-6, cal, GAMMA_S, GAMMA_I)
    assert b.pair_rate == pytest.approx(2 * a.pair_rate, rel=1e-12)
    assert b.kappa == pytest.approx(math.sqrt(2) * a.kappa, rel=1e-12)
    assert kappa_from_rate(0.0, GAMMA_S, GAMMA_I) == 0.0
    assert rate_from_pump(0.0, cal) == 0.0


@given(R=st.floats(1.0, 1e7))
def test_rate_kappa_round_trip(R):
    p = BiphotonParams(GAMMA_S, GAMMA_I, kappa_from_rate(R, GAMMA_S, GAMMA_I), R)
    # correlated part only: the same parameters with the R^2 floor removed
    excess = replace(p, pair_rate=0.0)
    f = lambda t: g2(t, excess)
    integral = quad(f, -80 / GAMMA_S, 0, epsabs=0, epsrel=1e-12)[0] + quad(f, 0, 80 / GAMMA_I, epsabs=0, epsrel=1e-12)[0]
    assert g2(1e-6, p) - g2(1e-6, excess) == pytest.approx(R * R, rel=1e-12)
    assert integral == pytest.approx(R, rel=1e-9)
    assert correlated_rate(p) == pytest.approx(R, rel=1e-12)


def test_fwhm_matches_analytic():
    w = conditional_density(P)
    assert waveform_fwhm(w) == pytest.approx(math.log(2) * (1 / P.gamma_s + 1 / P.gamma_i), rel=1e-6)


def test_waveform_csv_and_sidecar(tmp_path):
    w = conditional_density(P)
    path = w.to_csv(tmp_path / "w.csv", {"seed": 3, "config_hash": "abc"})
    lines = path.read_text().splitlines()
    assert lines[0] == "tau_ns,density"
    assert len(lines) == w.tau.size + 1
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["seed"] == 3 and meta["step_s"] == w.step


def test_params_problems():
    assert P.problems() == []
    assert len(BiphotonParams(0.0, -1.0, -1.0, -1.0).problems()) == 4
