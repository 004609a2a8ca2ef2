"""Rubidium D1 absorption of narrow-band photons in a vapor cell.

Frequencies are handled as detunings (Hz) from the reference frequency
declared in the atomic data file (the 85Rb F=3 -> F'=2 lock point).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import Boltzmann, atm, c, h, physical_constants
from scipy.special import voigt_profile

from .crystal import DomainError

MU_B_OVER_H = physical_constants["Bohr magneton in Hz/T"][0]
VAPOR_RANGE_K = (250.0, 400.0)
MAX_LINEAR_FIELD = 0.1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_B_NODES, _B_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class HyperfineLine:
    isotope: int
    f_ground: int
    f_excited: int
    detuning: float  # Hz from the reference
    strength: float
    natural_linewidth: float  # Hz, FWHM
    mass: float  # kg
    frequency: float  # absolute, Hz

    @property
    def wavelength(self) -> float:
        return c / self.frequency


@dataclass(frozen=True)
class AtomicData:
    lines: tuple[HyperfineLine, ...]
    reference_frequency: float
    vapor_solid: tuple[float, float, float]
    vapor_liquid: tuple[float, float, float]
    g_eff: float

    def isotope(self, iso: int) -> tuple[HyperfineLine, ...]:
        return tuple(l for l in self.lines if l.isotope == iso)

    def line(self, iso: int, fg: int, fe: int) -> HyperfineLine:
        for l in self.lines:
            if (l.isotope, l.f_ground, l.f_excited) == (iso, fg, fe):
                return l
        raise KeyError((iso, fg, fe))


def load_atomic_data(path=None) -> AtomicData:
    """Parse the plain-text line table (header ``# key: value`` entries)."""
    if path is None:
        text = resources.files("cavityspdc").joinpath("data/rb_d1_lines.txt").read_text()
    else:
        text = Path(path).read_text()
    meta, rows = {}, []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, value = body.partition(":")
            if sep and " " not in key:
                meta[key] = value.strip()
            continue
        rows.append(line.split())
    ref = float(meta["reference_frequency_Hz"])
    masses = {85: float(meta["mass_85Rb_kg"]), 87: float(meta["mass_87Rb_kg"])}
    lines = []
    for iso, fg, fe, det, s, gam in rows:
        iso_n = int(iso.rstrip("Rb"))
        det_hz = float(det) * 1e6
        lines.append(
            HyperfineLine(iso_n, int(fg), int(fe), det_hz, float(s), float(gam) * 1e6, masses[iso_n], ref + det_hz)
        )
    return AtomicData(
        tuple(lines),
        ref,
        tuple(float(v) for v in meta["vapor_solid"].split()),
        tuple(float(v) for v in meta["vapor_liquid"].split()),
        float(meta.get("g_eff_default", 0.7)),
    )


RB_D1 = load_atomic_data()


@dataclass(frozen=True)
class VaporCellSpec:
    length: float = 0.075
    temperature: float = 295.0
    fraction_85: float = 0.0
    fraction_87: float = 1.0
    window_transmission: float = 0.85
    field: float = 0.0
    nonuniformity: float = 0.10
    average_nonuniformity: bool = False
    g_eff: float = 0.7

    def problems(self) -> list[str]:
        out = []
        if not self.length > 0:
            out.append(f"cell.length_m must be > 0, got {self.length}")
        if not 0 < self.window_transmission <= 1:
            out.append(f"cell.window_transmission must lie in (0, 1], got {self.window_transmission}")
        for name in ("fraction_85", "fraction_87"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                out.append(f"cell.{name} must lie in [0, 1], got {v}")
        if abs(self.fraction_85 + self.fraction_87 - 1) > 1e-9:
            out.append(f"cell isotope fractions must sum to 1, got {self.fraction_85 + self.fraction_87}")
        if not VAPOR_RANGE_K[0] <= self.temperature <= VAPOR_RANGE_K[1]:
            out.append(f"cell.temperature_k must lie in {list(VAPOR_RANGE_K)}, got {self.temperature}")
        if abs(self.field) > MAX_LINEAR_FIELD:
            out.append(f"cell.field_t must satisfy |B| <= {MAX_LINEAR_FIELD} T, got {self.field}")
        if not 0 <= self.nonuniformity < 1:
            out.append(f"cell.nonuniformity must lie in [0, 1), got {self.nonuniformity}")
        return out

    def fraction(self, iso: int) -> float:
        return {85: self.fraction_85, 87: self.fraction_87}[iso]


def vapor_pressure(temperature: float, data: AtomicData = RB_D1) -> float:
    """Saturated vapor pressure (Pa) over the stable condensed phase."""
    T = temperature
    if not VAPOR_RANGE_K[0] <= T <= VAPOR_RANGE_K[1]:
        raise DomainError(f"temperature {T} K outside the vapor-pressure range {list(VAPOR_RANGE_K)} K")
    a, b, k = data.vapor_solid
    solid = a + b / T + k * math.log10(T)
    a, b, k = data.vapor_liquid
    liquid = a + b / T + k * math.log10(T)
    return atm * 10.0 ** min(solid, liquid)


def vapor_density(temperature: float, data: AtomicData = RB_D1) -> float:
    """Total atomic number density (1/m^3) from the ideal-gas law."""
    return vapor_pressure(temperature, data) / (Boltzmann * temperature)


def doppler_width(temperature: float, nu0: float, mass: float) -> float:
    """Doppler FWHM (Hz): nu0 sqrt(8 ln2 k T / (m c^2))."""
    if not (temperature > 0 and nu0 > 0 and mass > 0):
        raise ValueError("temperature, frequency and mass must be positive")
    return nu0 * math.sqrt(8.0 * math.log(2.0) * Boltzmann * temperature / (mass * c * c))


def zeeman_components(line: HyperfineLine | None, field: float, g_eff: float = 0.7) -> list[tuple[float, float]]:
    """Effective linear Zeeman model: two half-weight components at +-g mu_B B / h."""
    if abs(field) > MAX_LINEAR_FIELD:
        raise DomainError(f"|B| = {abs(field)} T exceeds the linear-regime limit {MAX_LINEAR_FIELD} T")
    if field == 0:
        return [(0.0, 1.0)]
    shift = abs(g_eff * MU_B_OVER_H * field)
    # sorted so that B and -B give identical component lists
    return [(-shift, 0.5), (shift, 0.5)]


def voigt(detuning, lorentz_fwhm: float, gauss_fwhm: float):
    """Area-normalised Voigt profile (1/Hz) from the two FWHMs."""
    sigma = gauss_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return voigt_profile(np.asarray(detuning, dtype=float), sigma, 0.5 * lorentz_fwhm)


def voigt_unit_peak(detuning, lorentz_fwhm: float, gauss_fwhm: float):
    """Voigt profile scaled to unit value at line centre."""
    return voigt(detuning, lorentz_fwhm, gauss_fwhm) / voigt(0.0, lorentz_fwhm, gauss_fwhm)


def _field_samples(cell: VaporCellSpec):
    if cell.average_nonuniformity and cell.field != 0:
        return cell.field * (1.0 + cell.nonuniformity * _B_NODES), 0.5 * _B_WEIGHTS
    return np.array([cell.field]), np.array([1.0])


def optical_depth(detuning, cell: VaporCellSpec, lines, density: float | None = None) -> np.ndarray:
    """Optical depth at ``detuning`` (Hz from the data reference).

    Each line contributes n L sigma0 s (pi gamma / 2) V(nu), with V the
    area-normalised Voigt profile, so that a Doppler-free line reaches the
    natural-linewidth peak cross section strength x 3 lambda^2 / 2 pi.
    ``density`` overrides the saturated vapor density (1/m^3).
    """
    x = np.asarray(detuning, dtype=float)
    od = np.zeros_like(x)
    lines = tuple(lines)
    if not lines:
        return od
    n = vapor_density(cell.temperature) if density is None else density
    fields, fweights = _field_samples(cell)
    for line in lines:
        frac = cell.fraction(line.isotope)
        if frac == 0:
            continue
        sigma0 = 3.0 * line.wavelength**2 / (2.0 * math.pi)
        scale = frac * n * cell.length * sigma0 * line.strength * (math.pi * line.natural_linewidth / 2.0)
        gd = doppler_width(cell.temperature, line.frequency, line.mass)
        u = x - line.detuning
        prof = np.zeros_like(x)
        for B, wB in zip(fields, fweights):
            for shift, w in zeeman_components(line, B, cell.g_eff):
                prof = prof + (wB * w) * voigt(u - shift, line.natural_linewidth, gd)
        od = od + scale * prof
    return od


def transmittance(detuning, cell: VaporCellSpec, lines, density: float | None = None):
    t = cell.window_transmission * np.exp(-optical_depth(detuning, cell, lines, density))
    return float(t) if np.ndim(t) == 0 else t


def _breakpoints(center: float, cell: VaporCellSpec, lines) -> np.ndarray:
    pts = [center]
    fields, _ = _field_samples(cell)
    for line in lines:
        gd = doppler_width(cell.temperature, line.frequency, line.mass)
        w = max(gd, line.natural_linewidth)
        for B in fields:
            for shift, _w in zeeman_components(line, B, cell.g_eff):
                c0 = line.detuning + shift
                pts.append(c0)
                for k in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 32.0):
                    pts.extend((c0 - k * w, c0 + k * w))
    return np.asarray(pts)


def photon_transmittance(center: float, bandwidth: float, cell: VaporCellSpec, lines) -> float:
    """Transmittance averaged over a unit-area Lorentzian photon spectrum.

    With nu = center + (bandwidth/2) tan(theta) the Lorentzian weight becomes
    uniform in theta; the absorbed fraction is integrated by composite
    Gauss-Legendre on segments split at the line features.
    """
    if not bandwidth > 0:
        raise ValueError("photon bandwidth must be positive")
    lines = tuple(lines)
    if not lines or all(cell.fraction(l.isotope) == 0 for l in lines):
        return cell.window_transmission
    hw = 0.5 * bandwidth
    theta_pts = np.arctan((_breakpoints(center, cell, lines) - center) / hw)
    edges = np.unique(np.concatenate([[-0.5 * np.pi, 0.5 * np.pi], theta_pts]))
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    theta = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    nu = center + hw * np.tan(theta)
    absorbed = -np.expm1(-optical_depth(nu, cell, lines))
    return cell.window_transmission * (1.0 - float(np.dot(wts, absorbed)) / np.pi)


@dataclass
class VaporScan:
    x: np.ndarray
    transmittance: np.ndarray

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "transmittance"])
            for xv, tv in zip(self.x, self.transmittance):
                w.writerow([f"{xv:.12g}", f"{tv:.12g}"])
        return path


@dataclass
class CrystalTemperatureScan(VaporScan):
    mode_transmittance: np.ndarray = None
    weight: np.ndarray = None
    emission_detuning: np.ndarray = None
    signal_index: np.ndarray = None


def crystal_temperature_scan(
    crystal,
    signal,
    idler,
    cell: VaporCellSpec,
    lines,
    temperatures,
    photon_bandwidth: float,
    peak_rate: float,
    floor: float,
    data: AtomicData = RB_D1,
) -> CrystalTemperatureScan:
    """Photon transmittance versus crystal temperature.

    At each temperature the emitting pair is selected, its signal photon is
    sent through the cell, and the recorded transmittance is the ratio of
    transmitted to incident coincidences, where the flat accidental floor
    passes at the window transmission.
    """
    from .combs import emission_mode, scan_tolerance

    T = np.asarray(temperatures, dtype=float)
    tol = scan_tolerance(signal, idler)
    lines = tuple(lines)
    mode_t = np.empty(T.size)
    weight = np.empty(T.size)
    det = np.empty(T.size)
    idx = np.empty(T.size, dtype=np.int64)
    cache: dict[float, float] = {}
    for k, t in enumerate(T):
        p = emission_mode(crystal, signal, idler, t, tolerance=tol)
        d = p.signal_emission - data.reference_frequency
        if d not in cache:
            cache[d] = photon_transmittance(d, photon_bandwidth, cell, lines)
        mode_t[k] = cache[d]
        weight[k] = p.weight
        det[k] = d
        idx[k] = p.signal_index
    signal_rate = peak_rate * weight
    measured = (signal_rate * mode_t + floor * cell.window_transmission) / (signal_rate + floor)
    return CrystalTemperatureScan(T, measured, mode_t, weight, det, idx)


def cell_temperature_scan(center: float, bandwidth: float, cell: VaporCellSpec, lines, temperatures) -> VaporScan:
    from dataclasses import replace

    T = np.asarray(temperatures, dtype=float)
    vals = np.array([photon_transmittance(center, bandwidth, replace(cell, temperature=t), lines) for t in T])
    return VaporScan(T, vals)


def field_scan(center: float, bandwidth: float, cell: VaporCellSpec, lines, fields) -> VaporScan:
    from dataclasses import replace

    B = np.asarray(fields, dtype=float)
    vals = np.array([photon_transmittance(center, bandwidth, replace(cell, field=b), lines) for b in B])
    return VaporScan(B, vals)


def find_dips(scan: VaporScan, baseline: float, depth: float = 0.01) -> list[dict]:
    """Contiguous runs where transmittance falls more than ``depth`` below ``baseline``."""
    below = scan.transmittance < baseline - depth
    if not below.any():
        return []
    padded = np.concatenate([[0], below.astype(np.int8), [0]])
    d = np.diff(padded)
    starts, stops = np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1
    dips = []
    for a, b in zip(starts, stops):
        seg = scan.transmittance[a : b + 1]
        k = a + int(np.argmin(seg))
        dips.append({"start": float(scan.x[a]), "stop": float(scan.x[b]), "center": float(scan.x[k]), "minimum": float(scan.transmittance[k])})
    return dips
