import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import atomic_mass, c
from scipy.integrate import quad

from cavityspdc.crystal import DomainError
from cavityspdc.vapor import (
    RB_D1,
    VaporCellSpec,
    VaporScan,
    crystal_temperature_scan,
    doppler_width,
    field_scan,
    find_dips,
    optical_depth,
    photon_transmittance,
    transmittance,
    vapor_density,
    voigt,
    zeeman_components,
)

RB87 = RB_D1.isotope(87)
F2F1 = RB_D1.line(87, 2, 1)
CELL = VaporCellSpec()


def alcock_density(T):
    """Hand oracle: solid-phase Alcock correlation (valid below the 312.46 K melting point)."""
    p = 101325.0 * 10 ** (4.857 - 4215.0 / T)
    return p / (1.380649e-23 * T)


@given(T1=st.floats(250, 400), T2=st.floats(250, 400))
def test_density_increasing(T1, T2):
    if T1 < T2:
        assert vapor_density(T1) < vapor_density(T2)


def test_density_oracles():
    assert vapor_density(295.0) == pytest.approx(alcock_density(295.0), rel=1e-9)
    ratio = vapor_density(305.0) / vapor_density(295.0)
    assert 1.5 <= ratio <= 4.0
    assert ratio == pytest.approx(alcock_density(305.0) / alcock_density(295.0), rel=1e-9)
    assert 0.5e16 <= vapor_density(295.0) <= 2e16
    # reference compilation: 3.92e-7 Torr at 25 C
    assert vapor_density(298.15) == pytest.approx(3.92e-7 * 133.322 / (1.380649e-23 * 298.15), rel=0.05)


def test_density_continuous_across_melting():
    T = np.linspace(305, 320, 3001)
    n = np.array([vapor_density(t) for t in T])
    assert np.all(np.diff(np.log(n)) < 0.01)


def test_density_domain():
    with pytest.raises(DomainError):
        vapor_density(200.0)
    with pytest.raises(DomainError):
        vapor_density(450.0)


def test_doppler_hand_oracle():
    m = 87 * atomic_mass
    # 300 K, 795 nm: sqrt(8 ln2 k T / m c^2) nu0 by hand = 501.6 MHz
    assert doppler_width(300.0, c / 795e-9, m) == pytest.approx(501.6e6, rel=0.01)
    # the often-quoted 512 MHz belongs to the 780 nm D2 line
    assert doppler_width(300.0, c / 780e-9, m) == pytest.approx(512e6, rel=0.01)


def test_doppler_scaling():
    m = 87 * atomic_mass
    T = np.linspace(270, 370, 101)
    w = np.array([doppler_width(t, 3.77e14, m) for t in T])
    assert np.allclose(w / np.sqrt(T), w[0] / math.sqrt(T[0]), rtol=1e-12, atol=0)
    assert doppler_width(300, 2 * 3.77e14, m) == pytest.approx(2 * doppler_width(300, 3.77e14, m), rel=1e-15)


def test_zeeman_components():
    assert zeeman_components(F2F1, 0.0) == [(0.0, 1.0)]
    comps = zeeman_components(F2F1, 1e-3, 0.7)
    assert sorted(s for s, _ in comps) == sorted(-s for s, _ in zeeman_components(F2F1, -1e-3, 0.7))
    assert [w for _, w in comps] == [0.5, 0.5]
    assert max(s for s, _ in comps) == pytest.approx(0.7 * 13.996e9 * 1e-3, rel=1e-4)
    assert max(s for s, _ in comps) == pytest.approx(9.8e6, rel=0.01)
    with pytest.raises(DomainError):
        zeeman_components(F2F1, 0.2)


def test_atomic_data():
    spacing = RB_D1.line(87, 1, 2).detuning - RB_D1.line(87, 2, 1).detuning
    # ground 6834.683 MHz + excited 816.656 MHz hyperfine splittings
    assert spacing == pytest.approx(7651.339e6, abs=0.01e6)
    for iso in (85, 87):
        assert sum(l.strength for l in RB_D1.isotope(iso)) == pytest.approx(1 / 3, rel=1e-6)
    assert all(l.natural_linewidth == pytest.approx(5.75e6, rel=0.01) for l in RB_D1.lines)
    assert RB_D1.line(85, 3, 2).detuning == 0.0


def test_zero_density_zero_od():
    x = np.linspace(-5e9, 8e9, 101)
    assert np.all(optical_depth(x, CELL, RB87, density=0.0) == 0.0)
    assert np.all(transmittance(x, CELL, RB87, density=0.0) == CELL.window_transmission)


@given(a=st.floats(0.1, 10.0))
def test_od_linear_in_density_and_length(a):
    x = np.array([F2F1.detuning, 0.0, 3e9])
    base = optical_depth(x, CELL, RB87)
    n = vapor_density(CELL.temperature)
    assert np.allclose(optical_depth(x, CELL, RB87, density=a * n), a * base, rtol=1e-12)
    assert np.allclose(optical_depth(x, replace(CELL, length=a * CELL.length), RB87), a * base, rtol=1e-12)


def test_far_wing_od():
    gd = doppler_width(CELL.temperature, F2F1.frequency, F2F1.mass)
    on = optical_depth(F2F1.detuning, CELL, [F2F1])
    off = optical_depth(F2F1.detuning + 12 * gd, CELL, [F2F1])
    assert off < 1e-3 * on


def test_transmittance_bounds_and_baseline():
    x = np.linspace(-8e9, 12e9, 2001)
    t = transmittance(x, CELL, RB_D1.lines)
    assert np.all(t > 0) and np.all(t <= CELL.window_transmission)
    assert transmittance(0.0, CELL, []) == 0.85


def test_transmittance_falls_with_cell_temperature():
    T = np.arange(280, 360, 5.0)
    t = [transmittance(F2F1.detuning, replace(CELL, temperature=x), RB87) for x in T]
    assert np.all(np.diff(t) < 0)


def test_large_field_restores_window_transmission_in_thin_cell():
    thin = replace(CELL, length=1e-3)
    for B in (-0.05, 0.05):
        t = photon_transmittance(F2F1.detuning, 4.5e6, replace(thin, field=B), [F2F1])
        assert t == pytest.approx(CELL.window_transmission, rel=0.02)


def test_photon_transmittance_delta_limit():
    for d in (F2F1.detuning, F2F1.detuning + 300e6, 2e9):
        assert photon_transmittance(d, 1e3, CELL, RB87) == pytest.approx(float(transmittance(d, CELL, RB87)), rel=1e-3)


def test_photon_transmittance_narrow_photon_vs_point():
    # stated bound: a 4.5 MHz photon differs from the point value by < 0.1%
    d = F2F1.detuning
    point = float(transmittance(d, CELL, RB87))
    assert abs(photon_transmittance(d, 4.5e6, CELL, RB87) / point - 1) < 1e-3


def test_photon_transmittance_lorentzian_wing_correction():
    # a Lorentzian has no second moment, so the leading correction to the point
    # value is first order in the bandwidth: (bw / 2 pi) int (T(c+x)+T(c-x)-2T(c)) / x^2 dx
    d, bw = F2F1.detuning, 4.5e6
    T = lambda x: float(transmittance(x, CELL, RB87))
    t0 = T(d)
    f = lambda x: (T(d + x) + T(d - x) - 2 * t0) / (x * x)
    edges = [1e3, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11]
    integral = sum(quad(f, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    predicted = bw / (2 * math.pi) * integral
    actual = photon_transmittance(d, bw, CELL, RB87) - t0
    assert actual == pytest.approx(predicted, rel=0.05)


def test_photon_transmittance_against_brute_force():
    d, bw = F2F1.detuning, 4.527e6
    hw = 0.5 * bw
    theta = np.linspace(-np.pi / 2, np.pi / 2, 2_000_001)[1:-1]
    absorbed = -np.expm1(-optical_depth(d + hw * np.tan(theta), CELL, RB87))
    ref = CELL.window_transmission * (1 - np.trapezoid(absorbed, theta) / np.pi)
    assert photon_transmittance(d, bw, CELL, RB87) == pytest.approx(ref, rel=1e-4)


@given(delta=st.floats(0, 3e9))
def test_photon_transmittance_even_about_isolated_line(delta):
    a = photon_transmittance(F2F1.detuning + delta, 4.5e6, CELL, [F2F1])
    b = photon_transmittance(F2F1.detuning - delta, 4.5e6, CELL, [F2F1])
    assert a == pytest.approx(b, rel=1e-9)


def test_beer_lambert_series():
    x = np.linspace(-3e9, 8e9, 301)
    a, b = replace(CELL, length=0.03), replace(CELL, length=0.045)
    series = np.exp(-optical_depth(x, a, RB87)) * np.exp(-optical_depth(x, b, RB87))
    single = np.exp(-optical_depth(x, replace(CELL, length=0.075), RB87))
    assert np.allclose(series, single, rtol=1e-12, atol=0)


def test_voigt_limits():
    x = np.linspace(-2e9, 2e9, 401)
    gd, gl = 500e6, 6e6
    sigma = gd / (2 * math.sqrt(2 * math.log(2)))
    gauss = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    v = voigt(x, 1e-6 * gl, gd)
    assert np.allclose(v, gauss, rtol=1e-4, atol=1e-4 * gauss.max())
    lor = (gl / 2 / math.pi) / (x**2 + (gl / 2) ** 2)
    v = voigt(x, gl, 1e-9 * gd)
    assert np.allclose(v, lor, rtol=1e-4, atol=0)


def test_field_transmittance_even():
    B = np.linspace(0, 0.05, 11)
    pos = field_scan(F2F1.detuning, 4.5e6, CELL, RB87, B).transmittance
    neg = field_scan(F2F1.detuning, 4.5e6, CELL, RB87, -B).transmittance
    assert np.array_equal(pos, neg)


def test_field_nonuniformity_averaging():
    avg = replace(CELL, field=0.01, average_nonuniformity=True)
    a = photon_transmittance(F2F1.detuning, 4.5e6, avg, RB87)
    b = photon_transmittance(F2F1.detuning, 4.5e6, replace(avg, average_nonuniformity=False), RB87)
    assert a != b and abs(a - b) < 0.01


def test_empty_line_list_gives_flat_scan(vapor_crystal, vapor_combs):
    T0 = vapor_crystal.reference_temperature
    T = np.linspace(T0 - 0.05, T0 + 0.05, 51)
    sc = crystal_temperature_scan(vapor_crystal, *vapor_combs, CELL, [], T, 4.5e6, 1000.0, 10.0)
    assert np.allclose(sc.transmittance, CELL.window_transmission, rtol=1e-12)


def test_find_dips():
    x = np.arange(10.0)
    t = np.array([0.85, 0.85, 0.6, 0.5, 0.85, 0.85, 0.7, 0.85, 0.845, 0.85])
    dips = find_dips(VaporScan(x, t), 0.85, 0.01)
    assert [d["center"] for d in dips] == [3.0, 6.0]


def test_cell_problems():
    assert CELL.problems() == []
    assert len(replace(CELL, window_transmission=1.2).problems()) == 1
    assert len(replace(CELL, fraction_85=0.5).problems()) == 1
    assert len(replace(CELL, field=0.5, length=0.0).problems()) == 2
