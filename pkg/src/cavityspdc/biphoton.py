"""Biphoton correlation waveform, bandwidth and brightness bookkeeping.

Decay rates are angular (1/s); bandwidths are returned as ordinary
frequencies in Hz. The delay ``tau`` is t_signal - t_idler.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

DEFAULT_STEP = 350e-12
DEFAULT_WINDOW_DECAYS = 10.0
MIN_CAPTURED_MASS = 0.9999


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class BiphotonParams:
    """Parameters of the two-sided exponential correlation function.

    ``pair_rate`` is the generated pair rate in pairs/s; ``kappa`` is fixed
    by the rate through :func:`kappa_from_rate` when built via
    :meth:`from_pump`.
    """

    gamma_s: float
    gamma_i: float
    kappa: float
    pair_rate: float
    pump_power: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not self.gamma_s > 0:
            out.append(f"biphoton.gamma_s must be > 0, got {self.gamma_s}")
        if not self.gamma_i > 0:
            out.append(f"biphoton.gamma_i must be > 0, got {self.gamma_i}")
        if self.kappa < 0:
            out.append(f"biphoton.kappa must be >= 0, got {self.kappa}")
        if self.pair_rate < 0:
            out.append(f"biphoton.pair_rate must be >= 0, got {self.pair_rate}")
        return out

    @classmethod
    def from_pump(cls, pump_power: float, calibration: float, gamma_s: float, gamma_i: float) -> "BiphotonParams":
        rate = rate_from_pump(pump_power, calibration)
        return cls(gamma_s, gamma_i, kappa_from_rate(rate, gamma_s, gamma_i), rate, pump_power)

    @classmethod
    def from_decay_times(cls, tau_s: float, tau_i: float, pair_rate: float, pump_power: float = 0.0):
        gs, gi = 1.0 / tau_s, 1.0 / tau_i
        return cls(gs, gi, kappa_from_rate(pair_rate, gs, gi), pair_rate, pump_power)


@dataclass
class Waveform:
    tau: np.ndarray
    values: np.ndarray
    step: float
    bounds: tuple[float, float]

    def to_csv(self, path, header: dict | None = None) -> Path:
        """Write ``tau_ns, density`` CSV plus a JSON sidecar with ``header``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_ns", "density"])
            for t, v in zip(self.tau, self.values):
                w.writerow([f"{t * 1e9:.6f}", f"{v:.12g}"])
        meta = {"step_s": self.step, "bounds_s": list(self.bounds), **(header or {})}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path


def _prefactor(p: BiphotonParams) -> float:
    return 4.0 * p.kappa**2 * p.gamma_s * p.gamma_i / (p.gamma_s + p.gamma_i) ** 2


def g2(tau, p: BiphotonParams):
    """Second-order correlation G2(tau) = R^2 + A exp(-|...|), continuous at 0."""
    tau = np.asarray(tau, dtype=float)
    shape = np.where(tau < 0, np.exp(p.gamma_s * np.minimum(tau, 0.0)), np.exp(-p.gamma_i * np.maximum(tau, 0.0)))
    out = p.pair_rate**2 + _prefactor(p) * shape
    return float(out) if out.ndim == 0 else out


def rate_from_pump(pump_power: float, calibration: float) -> float:
    """Generated pair rate, linear in pump power (W) with ``calibration`` pairs/s/W."""
    if pump_power < 0 or calibration < 0:
        raise ValueError("pump power and calibration must be non-negative")
    return calibration * pump_power


def kappa_from_rate(rate: float, gamma_s: float, gamma_i: float) -> float:
    """kappa such that the correlated part of G2 integrates to ``rate``.

    The integral of 4 k^2 Gs Gi/(Gs+Gi)^2 (1/Gs + 1/Gi) simplifies to
    4 k^2 / (Gs + Gi).
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return math.sqrt(rate * (gamma_s + gamma_i) / 4.0)


def correlated_rate(p: BiphotonParams) -> float:
    """Integral over tau of G2 - R^2."""
    return _prefactor(p) * (1.0 / p.gamma_s + 1.0 / p.gamma_i)


def bandwidth(gamma_s: float, gamma_i: float) -> float:
    """Biphoton bandwidth in Hz from the two angular decay rates."""
    if not (gamma_s > 0 and gamma_i > 0):
        raise ValueError("decay rates must be positive")
    a2, b2 = gamma_s * gamma_s, gamma_i * gamma_i
    root = math.sqrt(a2 * a2 + 6.0 * a2 * b2 + b2 * b2)
    # root - a2 - b2 rewritten as 4 a2 b2 / (root + a2 + b2) to avoid cancellation
    return math.sqrt(2.0 * a2 * b2 / (root + a2 + b2)) / (2.0 * math.pi)


def generated_brightness(
    detected_rate: float,
    eta_s: float,
    eta_i: float,
    t_s: float,
    t_i: float,
    pump_power: float,
    bandwidth_hz: float,
) -> float:
    """Generated spectral brightness in pairs s^-1 mW^-1 MHz^-1."""
    for name, v in (("eta_s", eta_s), ("eta_i", eta_i), ("t_s", t_s), ("t_i", t_i)):
        if not 0 < v <= 1:
            raise ZeroDivisionError(f"{name} must lie in (0, 1], got {v}")
    if not (pump_power > 0 and bandwidth_hz > 0):
        raise ZeroDivisionError("pump power and bandwidth must be positive")
    return detected_rate / (eta_s * eta_i * t_s * t_i * (pump_power * 1e3) * (bandwidth_hz * 1e-6))


def default_window(p: BiphotonParams) -> tuple[float, float]:
    return (-DEFAULT_WINDOW_DECAYS / p.gamma_s, DEFAULT_WINDOW_DECAYS / p.gamma_i)


def positive_mass(gamma_s: float, gamma_i: float) -> float:
    """Fraction of the untruncated density at tau > 0."""
    return (1.0 / gamma_i) / (1.0 / gamma_s + 1.0 / gamma_i)


def density_cdf(tau, gamma_s: float, gamma_i: float):
    """CDF of the untruncated conditional delay density."""
    tau = np.asarray(tau, dtype=float)
    w_neg = 1.0 - positive_mass(gamma_s, gamma_i)
    left = w_neg * np.exp(gamma_s * np.minimum(tau, 0.0))
    right = w_neg + (1.0 - w_neg) * (1.0 - np.exp(-gamma_i * np.maximum(tau, 0.0)))
    return np.where(tau < 0, left, right)


def window_mass(gamma_s: float, gamma_i: float, bounds) -> float:
    lo, hi = bounds
    return float(density_cdf(hi, gamma_s, gamma_i) - density_cdf(lo, gamma_s, gamma_i))


def conditional_density(p: BiphotonParams, bounds=None, step: float = DEFAULT_STEP) -> Waveform:
    """Heralded delay density, normalised to unit integral on ``bounds``.

    The grid is the set of multiples of ``step`` inside ``bounds`` (so tau = 0
    is a sample). Normalisation is analytic.
    """
    if not p.kappa > 0:
        raise ValueError("conditional density needs kappa > 0")
    if bounds is None:
        bounds = default_window(p)
    lo, hi = bounds
    mass = window_mass(p.gamma_s, p.gamma_i, bounds)
    if mass < MIN_CAPTURED_MASS:
        need = math.log(1.0 / (1.0 - MIN_CAPTURED_MASS))
        raise WindowError(
            f"window captures {mass:.6f} of the density; use at least "
            f"[{-need / p.gamma_s:.4g}, {need / p.gamma_i:.4g}] s"
        )
    k = np.arange(math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9) + 1)
    tau = k * step
    return Waveform(tau=tau, values=density(tau, p.gamma_s, p.gamma_i, bounds), step=step, bounds=(lo, hi))


def density(tau, gamma_s: float, gamma_i: float, bounds=None):
    """Continuous two-sided exponential density, optionally truncated to ``bounds``."""
    tau = np.asarray(tau, dtype=float)
    peak = 1.0 / (1.0 / gamma_s + 1.0 / gamma_i)
    v = peak * np.where(tau < 0, np.exp(gamma_s * np.minimum(tau, 0.0)), np.exp(-gamma_i * np.maximum(tau, 0.0)))
    if bounds is not None:
        v = v / window_mass(gamma_s, gamma_i, bounds)
        v = np.where((tau >= bounds[0]) & (tau <= bounds[1]), v, 0.0)
    return v


def waveform_fwhm(w: Waveform) -> float:
    """FWHM of a single-peaked waveform by log-linear interpolation.

    Log-linear interpolation is exact for exponential flanks.
    """
    v = w.values
    k = int(np.argmax(v))
    half = 0.5 * v[k]

    def crossing(indices):
        prev = k
        for j in indices:
            if v[j] <= half:
                a, b = v[prev], v[j]
                if b <= 0:
                    return w.tau[j]
                f = math.log(a / half) / math.log(a / b)
                return w.tau[prev] + f * (w.tau[j] - w.tau[prev])
            prev = j
        raise ValueError("waveform does not fall to half maximum inside the window")

    left = crossing(range(k - 1, -1, -1))
    right = crossing(range(k + 1, len(v)))
    return right - left


def params_dict(p: BiphotonParams) -> dict:
    return asdict(p)
