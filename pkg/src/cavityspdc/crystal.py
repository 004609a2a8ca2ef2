"""Dispersion, free spectral ranges and phase-matching gain of a monolithic
type-II crystal cavity.

All wavelengths are in metres and temperatures in kelvin at the public
surface; Sellmeier coefficients are stored in the conventional micrometre
units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.constants import c

# x where sinc^2(x) = sin^2(x)/x^2 = 1/2
SINC2_HALF_POINT = 1.3915573782515103

DOUBLE_PASS_LINEWIDTH = 0.44
CLUSTER_SPACING_FACTOR = 0.5


class DomainError(ValueError):
    """Argument outside the validity range of a model."""


class DegenerateDispersionError(ValueError):
    """Signal and idler group indices coincide, so the gain curve is unbounded."""


@dataclass(frozen=True)
class SellmeierSet:
    """Generalised Sellmeier model for one crystal axis.

    n^2 = a + sum_k b_k / (1 - c_k / lam^2) - d * lam^2   (lam in um, c_k in um^2)

    Thermo-optic correction (lam in um, dT = T - thermo_reference_k):
    dn = 1e-6 * (P1(lam) * dT + P2(lam) * dT^2), where P1, P2 are polynomials
    in lam with coefficients listed in ascending order.
    """

    a: float
    b: tuple[float, ...] = ()
    c: tuple[float, ...] = ()
    d: float = 0.0
    thermo_linear: tuple[float, ...] = ()
    thermo_quadratic: tuple[float, ...] = ()
    thermo_reference_k: float = 298.15
    band_um: tuple[float, float] = (0.4, 1.6)

    def problems(self, prefix: str = "sellmeier") -> list[str]:
        out = []
        if len(self.b) != len(self.c):
            out.append(f"{prefix}: b and c must have equal length ({len(self.b)} != {len(self.c)})")
        lo, hi = self.band_um
        if not 0 < lo < hi:
            out.append(f"{prefix}.band_um: need 0 < lo < hi, got {self.band_um}")
        return out

    def index_um(self, lam_um, temperature_k):
        lam_um = np.asarray(lam_um, dtype=float)
        lam2 = lam_um * lam_um
        n2 = self.a - self.d * lam2
        for bk, ck in zip(self.b, self.c):
            n2 = n2 + bk / (1.0 - ck / lam2)
        n = np.sqrt(n2)
        dT = temperature_k - self.thermo_reference_k
        if self.thermo_linear or self.thermo_quadratic:
            p1 = np.polynomial.polynomial.polyval(lam_um, self.thermo_linear) if self.thermo_linear else 0.0
            p2 = np.polynomial.polynomial.polyval(lam_um, self.thermo_quadratic) if self.thermo_quadratic else 0.0
            n = n + 1e-6 * (p1 * dT + p2 * dT * dT)
        return n

    @classmethod
    def constant(cls, n: float, band_um=(0.4, 1.6)) -> "SellmeierSet":
        """Dispersion-free set with index ``n`` everywhere."""
        return cls(a=n * n, band_um=tuple(band_um))


# Fan et al. (1987) / Koenig (2004) for n_y, Fradkin et al. (1999) for n_z,
# thermo-optic polynomials of Emanueli & Arie (2003).
KTP_Y = SellmeierSet(
    a=2.09930,
    b=(0.922683,),
    c=(0.0467695,),
    d=0.0138408,
    thermo_linear=(6.2897, 6.3061, -6.0629, 2.6486),
    thermo_quadratic=(-0.14445, 2.2244, -3.5770, 1.3470),
)
KTP_Z = SellmeierSet(
    a=2.12725,
    b=(1.18431, 0.6603),
    c=(5.14852e-2, 100.00507),
    d=9.68956e-3,
    thermo_linear=(9.9587, 9.9228, -8.9603, 4.1010),
    thermo_quadratic=(-1.1882, 10.459, -9.8136, 3.1481),
)


@dataclass(frozen=True)
class CrystalSpec:
    """Geometry, dispersion and tuning of the monolithic cavity.

    ``degeneracy_offset`` places the phase-matched, doubly resonant signal
    frequency at ``pump/2 + degeneracy_offset`` at the reference temperature
    (the idler sits symmetrically below).
    """

    length: float = 0.010
    poling_period: float = 8.89e-6
    temperature: float = 305.0
    reference_temperature: float = 305.0
    tuning_coefficient: float = 7.8e9
    pump_wavelength: float = 397.491063049e-9
    double_pass: bool = True
    axes: Mapping[str, SellmeierSet] = field(default_factory=lambda: {"y": KTP_Y, "z": KTP_Z})
    signal_axis: str = "z"
    idler_axis: str = "y"
    degeneracy_offset: float = 0.0
    fd_step: float = 1e-11

    def problems(self) -> list[str]:
        out = []
        if not self.length > 0:
            out.append(f"crystal.length_m must be > 0, got {self.length}")
        if not self.poling_period > 0:
            out.append(f"crystal.poling_period_m must be > 0, got {self.poling_period}")
        if not self.tuning_coefficient > 0:
            out.append(f"crystal.tuning_coefficient_hz_per_k must be > 0, got {self.tuning_coefficient}")
        if not self.pump_wavelength > 0:
            out.append(f"crystal.pump_wavelength_m must be > 0, got {self.pump_wavelength}")
        if not self.temperature > 0 or not self.reference_temperature > 0:
            out.append("crystal temperatures must be > 0 K")
        if not self.fd_step > 0:
            out.append(f"crystal.fd_step_m must be > 0, got {self.fd_step}")
        for ax in (self.signal_axis, self.idler_axis):
            if ax not in self.axes:
                out.append(f"crystal: axis {ax!r} has no Sellmeier set")
        for name, s in self.axes.items():
            out.extend(s.problems(f"crystal.sellmeier.{name}"))
        return out

    @property
    def pump_frequency(self) -> float:
        return c / self.pump_wavelength

    @property
    def signal_frequency(self) -> float:
        return 0.5 * self.pump_frequency + self.degeneracy_offset

    @property
    def idler_frequency(self) -> float:
        return 0.5 * self.pump_frequency - self.degeneracy_offset

    @property
    def signal_wavelength(self) -> float:
        return c / self.signal_frequency

    @property
    def idler_wavelength(self) -> float:
        return c / self.idler_frequency

    def with_(self, **changes) -> "CrystalSpec":
        return replace(self, **changes)


def _sellmeier(spec: CrystalSpec, axis: str) -> SellmeierSet:
    try:
        return spec.axes[axis]
    except KeyError:
        raise KeyError(f"no Sellmeier set for axis {axis!r}; have {sorted(spec.axes)}") from None


def refractive_index(spec: CrystalSpec, axis: str, wavelength, temperature=None):
    """Phase index of ``axis`` at ``wavelength`` (m) and ``temperature`` (K)."""
    s = _sellmeier(spec, axis)
    T = spec.temperature if temperature is None else temperature
    lam_um = np.asarray(wavelength, dtype=float) * 1e6
    lo, hi = s.band_um
    slack = 1e-12 * hi  # metre-to-micrometre round-off at the edges
    if np.any(lam_um < lo - slack) or np.any(lam_um > hi + slack):
        raise DomainError(f"wavelength outside the valid band [{lo}, {hi}] um for axis {axis!r}")
    n = s.index_um(lam_um, T)
    return float(n) if np.ndim(n) == 0 else n


def group_index(spec: CrystalSpec, axis: str, wavelength, temperature=None, step=None):
    """n_g = n - lam dn/dlam, derivative by central difference with ``step`` (m)."""
    s = _sellmeier(spec, axis)
    T = spec.temperature if temperature is None else temperature
    h_um = (spec.fd_step if step is None else step) * 1e6
    lam_um = np.asarray(wavelength, dtype=float) * 1e6
    lo, hi = s.band_um
    if np.any(lam_um - h_um < lo) or np.any(lam_um + h_um > hi):
        raise DomainError(
            f"wavelength too close to the band edge [{lo}, {hi}] um for a {h_um * 1e3:g} nm stencil"
        )
    n = s.index_um(lam_um, T)
    dn = (s.index_um(lam_um + h_um, T) - s.index_um(lam_um - h_um, T)) / (2 * h_um)
    ng = n - lam_um * dn
    return float(ng) if np.ndim(ng) == 0 else ng


def fsr(spec: CrystalSpec, axis: str, wavelength=None, temperature=None) -> float:
    """Free spectral range c / (2 n_g L) in Hz."""
    if wavelength is None:
        wavelength = spec.signal_wavelength if axis == spec.signal_axis else spec.idler_wavelength
    return c / (2.0 * group_index(spec, axis, wavelength, temperature) * spec.length)


def _defaults(spec, lam_s, lam_i, T):
    return (
        spec.signal_wavelength if lam_s is None else lam_s,
        spec.idler_wavelength if lam_i is None else lam_i,
        spec.temperature if T is None else T,
    )


def differential_group_index(spec: CrystalSpec, lam_s=None, lam_i=None, temperature=None) -> float:
    """Signed n_g(signal axis) - n_g(idler axis)."""
    lam_s, lam_i, T = _defaults(spec, lam_s, lam_i, temperature)
    return group_index(spec, spec.signal_axis, lam_s, T) - group_index(spec, spec.idler_axis, lam_i, T)


def differential_fsr(spec: CrystalSpec, lam_s=None, lam_i=None, temperature=None) -> float:
    """Signed FSR_signal - FSR_idler in Hz."""
    lam_s, lam_i, T = _defaults(spec, lam_s, lam_i, temperature)
    return fsr(spec, spec.signal_axis, lam_s, T) - fsr(spec, spec.idler_axis, lam_i, T)


def gain_linewidth(spec: CrystalSpec, lam_s=None, lam_i=None, temperature=None) -> float:
    """FWHM (Hz) of the parametric gain curve, 0.44 c / (dn_g L) for double pass."""
    dng = differential_group_index(spec, lam_s, lam_i, temperature)
    if dng == 0:
        raise DegenerateDispersionError("signal and idler group indices are equal")
    factor = DOUBLE_PASS_LINEWIDTH if spec.double_pass else 2 * DOUBLE_PASS_LINEWIDTH
    return factor * c / (abs(dng) * spec.length)


def vernier_spacing(spec: CrystalSpec, lam_s=None, lam_i=None, temperature=None) -> float:
    """Closed-form cluster spacing 0.5 c / (dn_g L) in Hz."""
    dng = differential_group_index(spec, lam_s, lam_i, temperature)
    if dng == 0:
        raise DegenerateDispersionError("signal and idler group indices are equal")
    return CLUSTER_SPACING_FACTOR * c / (abs(dng) * spec.length)


def gain_peak_frequency(spec: CrystalSpec, temperature=None) -> float:
    """Phase-matched signal frequency, moving at the tuning coefficient."""
    T = spec.temperature if temperature is None else temperature
    return spec.signal_frequency + spec.tuning_coefficient * (T - spec.reference_temperature)


def gain_envelope(spec: CrystalSpec, nu_s, temperature=None):
    """Normalised sinc^2 gain at signal frequency ``nu_s`` (Hz).

    The width is evaluated at the reference temperature so that a change of
    crystal temperature is a pure translation of the curve.
    """
    fwhm = gain_linewidth(spec, temperature=spec.reference_temperature)
    x = SINC2_HALF_POINT * (np.asarray(nu_s, dtype=float) - gain_peak_frequency(spec, temperature)) / (0.5 * fwhm)
    g = np.sinc(x / np.pi) ** 2
    return float(g) if np.ndim(g) == 0 else g
