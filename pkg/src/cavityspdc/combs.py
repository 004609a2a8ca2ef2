"""Signal/idler resonance combs, doubly resonant pairs and the
temperature-dependent mode structure of the cavity.

Temperature model: both combs are anchored at the reference temperature so
that signal mode 0 and idler mode 0 form an exactly doubly resonant pair.
Heating leaves the signal comb in place and red-shifts the idler comb at
twice the tuning coefficient, so the doubly resonant pair walks one signal
mode per ``|dnu| / (2 alpha_T)`` of temperature and the emitted signal
frequency hops by exactly one signal FSR.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crystal import CrystalSpec, fsr, gain_envelope, vernier_spacing

DEFAULT_WINDOW_CLUSTERS = 3


class CombConfigurationError(ValueError):
    pass


class DegenerateCombError(ValueError):
    pass


class NoModeError(LookupError):
    pass


@dataclass(frozen=True)
class ModeComb:
    axis: str
    reference_frequency: float
    fsr: float
    linewidth: float
    index_range: tuple[int, int]
    shift_rate: float = 0.0
    reference_temperature: float = 0.0

    def __post_init__(self):
        if not self.fsr > 0 or not self.linewidth > 0:
            raise CombConfigurationError(f"comb {self.axis!r}: FSR and linewidth must be positive")
        if self.linewidth >= self.fsr:
            raise CombConfigurationError(
                f"comb {self.axis!r} is unresolved: linewidth {self.linewidth:.4g} Hz >= FSR {self.fsr:.4g} Hz"
            )

    def frequency(self, index, temperature=None):
        T = self.reference_temperature if temperature is None else temperature
        shift = self.shift_rate * (T - self.reference_temperature)
        return self.reference_frequency + np.asarray(index) * self.fsr + shift

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.index_range[0], self.index_range[1] + 1)


@dataclass(frozen=True)
class ResonantPair:
    signal_index: int
    idler_index: int
    nu_s: float
    nu_i: float
    detuning: float
    gain_weight: float
    overlap: float
    signal_offset: float  # nu_s - nu_p / 2
    signal_emission: float
    idler_emission: float
    temperature: float

    @property
    def weight(self) -> float:
        return self.gain_weight * self.overlap


def build_comb(crystal: CrystalSpec, axis: str, decay_rate: float, index_range=None) -> ModeComb:
    """Resonance comb of ``axis`` with mode 0 anchored on the locked reference.

    ``decay_rate`` is the total cavity decay rate (1/s); the mode linewidth is
    ``decay_rate / 2 pi`` in Hz.
    """
    if not decay_rate > 0:
        raise CombConfigurationError(f"decay rate must be > 0, got {decay_rate}")
    is_signal = axis == crystal.signal_axis
    ref = crystal.signal_frequency if is_signal else crystal.idler_frequency
    lam = crystal.signal_wavelength if is_signal else crystal.idler_wavelength
    f = fsr(crystal, axis, lam, crystal.reference_temperature)
    if index_range is None:
        span = DEFAULT_WINDOW_CLUSTERS * vernier_spacing(crystal, temperature=crystal.reference_temperature)
        k = int(math.ceil(span / f)) + 2
        index_range = (-k, k)
    return ModeComb(
        axis=axis,
        reference_frequency=ref,
        fsr=f,
        linewidth=decay_rate / (2 * np.pi),
        index_range=(int(index_range[0]), int(index_range[1])),
        shift_rate=0.0 if is_signal else -2.0 * crystal.tuning_coefficient,
        reference_temperature=crystal.reference_temperature,
    )


def cluster_spacing(signal: ModeComb, idler: ModeComb) -> float:
    """Vernier period FSR_s FSR_i / |FSR_s - FSR_i| in Hz."""
    d = signal.fsr - idler.fsr
    if d == 0:
        raise DegenerateCombError("signal and idler FSRs are equal; no finite cluster spacing")
    return signal.fsr * idler.fsr / abs(d)


def mode_hop_spacing(dnu: float, tuning_coefficient: float) -> float:
    """Crystal temperature step (K) between adjacent emitting pairs: |dnu| / (2 alpha_T)."""
    if not tuning_coefficient > 0:
        raise ValueError(f"tuning coefficient must be > 0, got {tuning_coefficient}")
    return abs(dnu) / (2.0 * tuning_coefficient)


def pair_overlap(detuning, signal_linewidth: float, idler_linewidth: float):
    """Product of the two unit-peak Lorentzian mode responses.

    The detuning is shared between the modes in proportion to their
    linewidths, which puts both at the same fractional detuning.
    """
    x = 2.0 * np.asarray(detuning, dtype=float) / (signal_linewidth + idler_linewidth)
    return 1.0 / (1.0 + x * x) ** 2


def doubly_resonant_pairs(
    signal: ModeComb,
    idler: ModeComb,
    crystal: CrystalSpec,
    temperature=None,
    window=None,
    tolerance=None,
) -> list[ResonantPair]:
    """All (m, n) with |nu_s(m) + nu_i(n) - nu_p| <= tolerance.

    ``window`` is the half-width (Hz) of the signal-frequency range searched,
    centred on the signal anchor; it defaults to three cluster spacings.
    The result is sorted by distance of the signal mode from nu_p / 2.
    """
    T = crystal.temperature if temperature is None else temperature
    spacing = cluster_spacing(signal, idler)
    if window is None:
        window = DEFAULT_WINDOW_CLUSTERS * spacing
    if window < spacing:
        raise ValueError(f"window {window:.4g} Hz must cover one cluster spacing ({spacing:.4g} Hz)")
    if tolerance is None:
        tolerance = max(signal.linewidth, idler.linewidth)

    half = 0.5 * crystal.pump_frequency
    m = signal.indices
    s_off = (signal.reference_frequency - half) + m * signal.fsr + signal.shift_rate * (T - signal.reference_temperature)
    centre = signal.reference_frequency - half
    keep = np.abs(s_off - centre) <= window
    m, s_off = m[keep], s_off[keep]

    i_base = (idler.reference_frequency - half) + idler.shift_rate * (T - idler.reference_temperature)
    # need |s_off + i_base + n F_i| <= tol
    n_lo = np.ceil((-s_off - i_base - tolerance) / idler.fsr).astype(np.int64)
    n_hi = np.floor((-s_off - i_base + tolerance) / idler.fsr).astype(np.int64)
    n_lo = np.maximum(n_lo, idler.index_range[0])
    n_hi = np.minimum(n_hi, idler.index_range[1])
    counts = np.clip(n_hi - n_lo + 1, 0, None)
    if counts.sum() == 0:
        return []
    mm = np.repeat(m, counts)
    so = np.repeat(s_off, counts)
    starts = np.repeat(n_lo, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    nn = starts + offsets
    io = i_base + nn * idler.fsr
    delta = so + io
    ok = np.abs(delta) <= tolerance
    mm, nn, so, io, delta = mm[ok], nn[ok], so[ok], io[ok], delta[ok]

    gs, gi = signal.linewidth, idler.linewidth
    s_em = so - delta * gs / (gs + gi)
    i_em = io - delta * gi / (gs + gi)
    gain = np.atleast_1d(gain_envelope(crystal, half + s_em, T))
    ov = np.atleast_1d(pair_overlap(delta, gs, gi))

    pairs = [
        ResonantPair(
            signal_index=int(mm[k]),
            idler_index=int(nn[k]),
            nu_s=half + so[k],
            nu_i=half + io[k],
            detuning=float(delta[k]),
            gain_weight=float(gain[k]),
            overlap=float(ov[k]),
            signal_offset=float(so[k]),
            signal_emission=half + s_em[k],
            idler_emission=half + i_em[k],
            temperature=float(T),
        )
        for k in range(len(mm))
    ]
    pairs.sort(key=lambda p: (abs(p.signal_offset), p.signal_offset))
    return pairs


def select_emission_mode(pairs, temperature=None) -> ResonantPair:
    """Pair with the largest gain x overlap.

    Near-ties (relative 1e-12) go to the pair closer to nu_p / 2, then to the
    lower signal frequency.
    """
    if not pairs:
        raise NoModeError("no doubly resonant pair to select from")
    if temperature is not None:
        for p in pairs:
            if not math.isclose(p.temperature, temperature, rel_tol=0, abs_tol=1e-12):
                raise ValueError(f"pair evaluated at {p.temperature} K, not {temperature} K")
    best = max(p.weight for p in pairs)
    tied = [p for p in pairs if p.weight >= best * (1 - 1e-12)]
    return min(tied, key=lambda p: (abs(p.signal_offset), p.signal_offset))


def scan_tolerance(signal: ModeComb, idler: ModeComb) -> float:
    """Pairing tolerance wide enough that every cluster always offers a candidate."""
    return abs(signal.fsr - idler.fsr)


def emission_mode(crystal, signal, idler, temperature=None, tolerance=None) -> ResonantPair:
    if tolerance is None:
        tolerance = scan_tolerance(signal, idler)
    return select_emission_mode(doubly_resonant_pairs(signal, idler, crystal, temperature, tolerance=tolerance))


def resonance_temperature(signal: ModeComb, idler: ModeComb, crystal: CrystalSpec, m: int, n: int) -> float:
    """Crystal temperature at which pair (m, n) is exactly doubly resonant."""
    rate = signal.shift_rate + idler.shift_rate
    half = 0.5 * crystal.pump_frequency
    d0 = (signal.reference_frequency - half + m * signal.fsr) + (idler.reference_frequency - half + n * idler.fsr)
    return signal.reference_temperature - d0 / rate


@dataclass
class TemperatureScan:
    temperature: np.ndarray
    rate: np.ndarray
    signal_index: np.ndarray
    idler_index: np.ndarray
    nu_s: np.ndarray
    weight: np.ndarray
    signal_emission: np.ndarray

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T_K", "rate_cps", "selected_signal_index", "selected_idler_index", "nu_s_Hz"])
            for row in zip(self.temperature, self.rate, self.signal_index, self.idler_index, self.nu_s):
                w.writerow([f"{row[0]:.9f}", f"{row[1]:.9g}", int(row[2]), int(row[3]), f"{row[4]:.12e}"])
        return path


def temperature_grid(start: float, stop: float, step: float) -> np.ndarray:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def temperature_scan(
    crystal: CrystalSpec,
    signal: ModeComb,
    idler: ModeComb,
    temperatures,
    peak_rate: float,
    floor: float = 0.0,
) -> TemperatureScan:
    """Expected coincidence rate versus crystal temperature.

    rate(T) = peak_rate * gain * overlap of the selected pair + floor.
    ``temperatures`` must be uniformly spaced with step <= dT_m / 5.
    """
    T = np.asarray(temperatures, dtype=float)
    if T.size > 1:
        step = float(np.max(np.diff(T)))
        dtm = mode_hop_spacing(signal.fsr - idler.fsr, crystal.tuning_coefficient)
        if step > dtm / 5 * (1 + 1e-9):
            raise ValueError(f"scan step {step * 1e3:.3g} mK exceeds dT_m/5 = {dtm / 5 * 1e3:.3g} mK")
    tol = scan_tolerance(signal, idler)
    out = {k: np.empty(T.size) for k in ("rate", "m", "n", "nu", "w", "em")}
    for k, t in enumerate(T):
        p = emission_mode(crystal, signal, idler, t, tolerance=tol)
        out["w"][k] = p.weight
        out["rate"][k] = peak_rate * p.weight + floor
        out["m"][k], out["n"][k] = p.signal_index, p.idler_index
        out["nu"][k] = p.nu_s
        out["em"][k] = p.signal_emission
    return TemperatureScan(
        temperature=T,
        rate=out["rate"],
        signal_index=out["m"].astype(np.int64),
        idler_index=out["n"].astype(np.int64),
        nu_s=out["nu"],
        weight=out["w"],
        signal_emission=out["em"],
    )


def scan_peaks(scan: TemperatureScan, floor: float = 0.0, rel_height: float = 0.05) -> np.ndarray:
    """Indices of local maxima standing above ``floor`` by ``rel_height`` of the tallest."""
    from scipy.signal import find_peaks

    excess = scan.rate - floor
    if excess.max() <= 0:
        return np.array([], dtype=int)
    idx, _ = find_peaks(excess, height=rel_height * excess.max())
    return idx
