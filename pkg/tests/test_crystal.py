import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import c

from cavityspdc.crystal import (
    KTP_Y,
    KTP_Z,
    CrystalSpec,
    DegenerateDispersionError,
    DomainError,
    SellmeierSet,
    differential_fsr,
    differential_group_index,
    fsr,
    gain_envelope,
    gain_linewidth,
    gain_peak_frequency,
    group_index,
    refractive_index,
    vernier_spacing,
)


def constant_spec(n_s, n_i, length=0.010, **kw):
    return CrystalSpec(length=length, axes={"y": SellmeierSet.constant(n_i), "z": SellmeierSet.constant(n_s)}, **kw)


@given(lam=st.floats(0.5e-6, 1.2e-6), T=st.floats(273.15, 373.15), axis=st.sampled_from(["y", "z"]))
def test_ktp_index_is_physical(lam, T, axis):
    n = refractive_index(CrystalSpec(), axis, lam, T)
    assert math.isfinite(n) and 1.0 < n < 3.0


@given(lam=st.floats(0.5e-6, 1.2e-6), axis=st.sampled_from(["y", "z"]))
def test_group_index_exceeds_phase_index(lam, axis):
    spec = CrystalSpec()
    assert group_index(spec, axis, lam) >= refractive_index(spec, axis, lam)


def test_ktp_z_index_near_795nm():
    # published KTP n_z at 795 nm is about 1.845
    assert refractive_index(CrystalSpec(), "z", 795e-9, 298.0) == pytest.approx(1.84, abs=0.02)


def test_constant_set_gives_exact_index():
    spec = constant_spec(2.0, 2.0)
    lam = np.linspace(0.45e-6, 1.5e-6, 17)
    assert np.all(refractive_index(spec, "z", lam) == 2.0)
    assert group_index(spec, "z", 795e-9) == pytest.approx(2.0, abs=1e-12)


def test_band_edge_is_inclusive():
    assert math.isfinite(refractive_index(CrystalSpec(), "y", 0.4e-6))
    assert math.isfinite(refractive_index(CrystalSpec(), "y", 1.6e-6))


def test_out_of_band_names_the_band():
    with pytest.raises(DomainError, match=r"\[0.4, 1.6\]"):
        refractive_index(CrystalSpec(), "z", 2.0e-6)


def test_group_index_stencil_at_edge_raises():
    with pytest.raises(DomainError):
        group_index(CrystalSpec(), "z", 0.4e-6)


@pytest.mark.parametrize("axis", ["y", "z"])
def test_group_index_converges_in_step(axis):
    spec = CrystalSpec()
    a = group_index(spec, axis, 795e-9, step=1e-11)
    b = group_index(spec, axis, 795e-9, step=0.5e-11)
    assert abs(a - b) < 1e-6


def test_differential_group_index_magnitude():
    # KTP data gives n_g,z > n_g,y at 795 nm; the magnitude is what sets the vernier
    assert abs(differential_group_index(CrystalSpec())) == pytest.approx(0.1, abs=0.02)


def test_fsr_arithmetic():
    spec = constant_spec(1.85, 1.85)
    assert fsr(spec, "z", 795e-9) == pytest.approx(c / (2 * 1.85 * 0.01), rel=1e-12)
    assert fsr(spec, "z", 795e-9) == pytest.approx(8.102e9, rel=1e-3)


@given(a=st.floats(0.1, 10.0))
def test_fsr_scales_inversely_with_length(a):
    spec = CrystalSpec()
    assert fsr(spec.with_(length=a * spec.length), "z") == pytest.approx(fsr(spec, "z") / a, rel=1e-12)


def test_default_fsr_near_87rb_line_spacing():
    spacing = 7.651e9
    for axis in ("y", "z"):
        assert abs(fsr(CrystalSpec(), axis) / spacing - 1) < 0.10


def test_default_differential_fsr_magnitude():
    assert abs(differential_fsr(CrystalSpec())) == pytest.approx(440e6, rel=0.10)


def test_identical_axes_zero_differential_fsr():
    spec = CrystalSpec(axes={"y": KTP_Z, "z": KTP_Z}, degeneracy_offset=0.0)
    assert differential_fsr(spec) == 0.0


def test_swapping_axes_flips_sign():
    spec = CrystalSpec()
    swapped = spec.with_(signal_axis="y", idler_axis="z")
    lam = spec.signal_wavelength
    assert differential_fsr(swapped, lam, lam) == pytest.approx(-differential_fsr(spec, lam, lam), rel=1e-12)


def test_gain_linewidth_arithmetic():
    spec = constant_spec(1.9, 1.8)
    assert gain_linewidth(spec) == pytest.approx(0.44 * c / (0.1 * 0.01), rel=1e-9)
    assert gain_linewidth(spec) == pytest.approx(132e9, rel=1e-3)


@given(ns=st.floats(1.5, 2.5), dn=st.floats(0.01, 0.3), L=st.floats(1e-3, 5e-2))
def test_linewidth_to_cluster_ratio(ns, dn, L):
    spec = constant_spec(ns + dn, ns, L)
    assert gain_linewidth(spec) / vernier_spacing(spec) == pytest.approx(0.88, rel=1e-12)


def test_single_pass_doubles_linewidth():
    spec = CrystalSpec()
    assert gain_linewidth(spec.with_(double_pass=False)) == pytest.approx(2 * gain_linewidth(spec), rel=1e-12)


def test_degenerate_dispersion_raises():
    with pytest.raises(DegenerateDispersionError):
        gain_linewidth(constant_spec(1.8, 1.8))


def test_gain_envelope_peak_and_half_points():
    spec = CrystalSpec()
    peak = gain_peak_frequency(spec)
    half = 0.5 * gain_linewidth(spec, temperature=spec.reference_temperature)
    assert gain_envelope(spec, peak) == 1.0
    assert gain_envelope(spec, peak + half) == pytest.approx(0.5, abs=1e-6)
    assert gain_envelope(spec, peak - half) == pytest.approx(0.5, abs=1e-6)


def test_gain_peak_tunes_at_alpha():
    spec = CrystalSpec()
    shift = gain_peak_frequency(spec, spec.reference_temperature + 1.0) - gain_peak_frequency(spec, spec.reference_temperature)
    assert shift == pytest.approx(7.8e9, rel=1e-9)


@given(d=st.floats(0, 1.0))
def test_gain_envelope_even(d):
    spec = CrystalSpec()
    p = gain_peak_frequency(spec)
    fw = gain_linewidth(spec)
    assert gain_envelope(spec, p + d * fw) == pytest.approx(gain_envelope(spec, p - d * fw), rel=1e-9, abs=1e-15)


def test_gain_envelope_monotone_inside_half_width():
    spec = CrystalSpec()
    p = gain_peak_frequency(spec)
    nu = p + np.linspace(0, 0.5 * gain_linewidth(spec), 200)
    assert np.all(np.diff(gain_envelope(spec, nu)) < 0)


@given(dT=st.floats(-0.5, 0.5), x=st.floats(-1.0, 1.0))
def test_gain_envelope_temperature_translation(dT, x):
    spec = CrystalSpec()
    nu = gain_peak_frequency(spec) + x * gain_linewidth(spec)
    T = spec.temperature
    a = gain_envelope(spec, nu, T)
    b = gain_envelope(spec, nu + spec.tuning_coefficient * dT, T + dT)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_shipped_sets_are_consistent():
    assert KTP_Y.problems() == [] and KTP_Z.problems() == []
    assert CrystalSpec().problems() == []
    assert "length" in " ".join(CrystalSpec(length=-1).problems())
