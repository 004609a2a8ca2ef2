"""Herald-triggered amplitude modulation of the single-photon waveform.

Profiles act on the herald-relative delay tau = t_signal - t_herald and
return intensity transmission. Negative delays presume a delay line in the
signal arm; ``latency`` shifts the whole profile.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .biphoton import Waveform
from .stats import IDLER, SIGNAL, SIGNAL2, EventStream

KINDS = ("identity", "square", "step", "sampled", "product")


@dataclass(frozen=True)
class ModulationProfile:
    kind: str = "identity"
    period: float = 0.0
    duty: float = 0.5
    count: int = 0
    offset: float = 0.0
    edge: float = 0.0
    sense: str = "close-after"
    grid: tuple[float, ...] = ()
    amplitude: tuple[float, ...] = ()
    latency: float = 0.0
    factors: tuple["ModulationProfile", ...] = ()

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"modulation.kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "square":
            if not self.period > 0:
                out.append(f"modulation.period_s must be > 0, got {self.period}")
            if not 0 <= self.duty <= 1:
                out.append(f"modulation.duty must lie in [0, 1], got {self.duty}")
            if self.count < 0:
                out.append(f"modulation.count must be >= 0, got {self.count}")
        if self.kind == "step" and self.sense not in ("open-after", "close-after"):
            out.append(f"modulation.sense must be open-after or close-after, got {self.sense!r}")
        if self.kind == "sampled":
            if len(self.grid) != len(self.amplitude) or len(self.grid) < 2:
                out.append("modulation: sampled profile needs matching grid and amplitude of length >= 2")
            if any(not 0 <= a <= 1 for a in self.amplitude):
                out.append("modulation.amplitude values must lie in [0, 1]")
        for f in self.factors:
            out.extend(f.problems())
        return out


def square_train(period: float, duty: float, count: int, offset: float = 0.0, latency: float = 0.0) -> ModulationProfile:
    return ModulationProfile("square", period=period, duty=duty, count=count, offset=offset, latency=latency)


def step(edge: float, sense: str = "close-after", latency: float = 0.0) -> ModulationProfile:
    return ModulationProfile("step", edge=edge, sense=sense, latency=latency)


def compose(*profiles: ModulationProfile) -> ModulationProfile:
    """Pointwise product of the given profiles."""
    return ModulationProfile("product", factors=tuple(profiles))


def intensity_transmission(profile: ModulationProfile, tau):
    """Intensity transmission in [0, 1] at herald-relative delay ``tau`` (s)."""
    tau = np.asarray(tau, dtype=float)
    t = tau - profile.latency
    k = profile.kind
    if k == "identity":
        out = np.ones_like(t)
    elif k == "square":
        u = t - profile.offset
        n = np.floor(u / profile.period)
        phase = u - n * profile.period
        out = ((n >= 0) & (n < profile.count) & (phase < profile.duty * profile.period)).astype(float)
    elif k == "step":
        closed_after = profile.sense == "close-after"
        out = np.where(t < profile.edge, 1.0 if closed_after else 0.0, 0.0 if closed_after else 1.0)
    elif k == "sampled":
        amp = np.interp(t, profile.grid, profile.amplitude)
        out = amp * amp
    elif k == "product":
        out = np.ones_like(t)
        for f in profile.factors:
            out = out * intensity_transmission(f, tau)
    else:
        raise ValueError(f"unknown modulation kind {k!r}")
    return float(out) if out.ndim == 0 else out


def apply_to_waveform(w: Waveform, profile: ModulationProfile) -> Waveform:
    if profile.kind == "identity":
        return replace(w, values=w.values.copy())
    return replace(w, values=w.values * intensity_transmission(profile, w.tau))


def support_intervals(w: Waveform) -> list[tuple[float, float]]:
    """Maximal runs of samples with non-zero value, as (first tau, last tau)."""
    on = np.asarray(w.values) > 0
    if not on.any():
        return []
    padded = np.concatenate([[False], on, [False]]).astype(np.int8)
    d = np.diff(padded)
    starts, stops = np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1
    return [(float(w.tau[a]), float(w.tau[b])) for a, b in zip(starts, stops)]


def herald_delays(stream: EventStream) -> tuple[np.ndarray, np.ndarray]:
    """Indices of signal events and their delay (ps) to the herald that produced them.

    Uses the truth pairing when the partner idler was detected, otherwise
    the nearest herald in time.
    """
    heralds = stream.channel_times(IDLER)
    if heralds.size == 0:
        raise ValueError("stream has no idler heralds")
    sig = np.flatnonzero((stream.channels == SIGNAL) | (stream.channels == SIGNAL2))
    ts = stream.times[sig]

    j = np.searchsorted(heralds, ts)
    before = heralds[np.clip(j - 1, 0, heralds.size - 1)]
    after = heralds[np.clip(j, 0, heralds.size - 1)]
    nearest = np.where(np.abs(ts - before) <= np.abs(after - ts), before, after)
    delay = ts - nearest

    if stream.pair_ids is not None:
        idl = np.flatnonzero(stream.channels == IDLER)
        ip = stream.pair_ids[idl]
        valid = ip >= 0
        order = np.argsort(ip[valid], kind="stable")
        keys = ip[valid][order]
        vals = stream.times[idl][valid][order]
        sp = stream.pair_ids[sig]
        pos = np.searchsorted(keys, sp)
        pos_c = np.clip(pos, 0, max(keys.size - 1, 0))
        found = (sp >= 0) & (keys.size > 0) & (pos < keys.size)
        if keys.size:
            found &= keys[pos_c] == sp
            delay = np.where(found, ts - vals[pos_c], delay)
    return sig, delay


def apply_to_stream(stream: EventStream, profile: ModulationProfile, seed: int) -> EventStream:
    """Thin signal events with probability given by the profile at their herald delay."""
    sig, delay = herald_delays(stream)
    keep = np.ones(len(stream), dtype=bool)
    if profile.kind != "identity":
        rng = np.random.default_rng(seed)
        p = intensity_transmission(profile, delay / 1e12)
        keep[sig] = rng.random(sig.size) < p
    return EventStream(
        stream.times[keep],
        stream.channels[keep],
        stream.duration,
        stream.seed,
        None if stream.pair_ids is None else stream.pair_ids[keep],
    )


def square_preset(bounds: tuple[float, float], count: int = 7, duty: float = 0.5) -> ModulationProfile:
    """Illustrative train: ``count`` pulses tiling the waveform window from its start."""
    lo, hi = bounds
    return square_train(period=(hi - lo) / count, duty=duty, count=count, offset=lo)


def step_preset() -> ModulationProfile:
    return step(0.0, "close-after")
