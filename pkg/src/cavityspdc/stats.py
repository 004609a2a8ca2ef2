"""Monte Carlo detector time tags, coincidence histograms and the
two- and three-detector anticorrelation estimators.

Time tags are integer picoseconds. Channel 0 is the signal detector D_s,
channel 1 the second signal detector D_s' behind the beam splitter, channel
2 the idler (herald) detector D_i.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfc, erfcx

from .biphoton import BiphotonParams, density_cdf, positive_mass

SIGNAL, SIGNAL2, IDLER = 0, 1, 2
CHANNEL_NAMES = {SIGNAL: "s", SIGNAL2: "s'", IDLER: "i"}
PS = 1e12
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

RECORD_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])


class UndefinedEstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionConfig:
    efficiency_s: float = 0.63
    efficiency_s2: float = 0.63
    efficiency_i: float = 0.63
    transmittance_s: float = 0.27
    transmittance_i: float = 0.54
    resolution: float = 350e-12
    jitter_model: str = "gaussian"
    coincidence_window: float = 100e-9
    background_s: float = 0.0
    background_s2: float = 0.0
    background_i: float = 0.0
    splitter_ratio: float = 0.5
    dead_time: float = 0.0

    def problems(self) -> list[str]:
        out = []
        for name in ("efficiency_s", "efficiency_s2", "efficiency_i", "transmittance_s", "transmittance_i", "splitter_ratio"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                out.append(f"detection.{name} must lie in [0, 1], got {v}")
        if not self.coincidence_window > 0:
            out.append(f"detection.coincidence_window_s must be > 0, got {self.coincidence_window}")
        if self.resolution < 0:
            out.append(f"detection.resolution_s must be >= 0, got {self.resolution}")
        if self.jitter_model not in ("gaussian", "uniform", "none"):
            out.append(f"detection.jitter_model must be gaussian, uniform or none, got {self.jitter_model!r}")
        for name in ("background_s", "background_s2", "background_i", "dead_time"):
            if getattr(self, name) < 0:
                out.append(f"detection.{name} must be >= 0, got {getattr(self, name)}")
        return out

    @property
    def jitter_sigma(self) -> float:
        """Gaussian sigma reading the resolution as a FWHM."""
        return self.resolution / FWHM_PER_SIGMA

    @classmethod
    def ideal(cls, **kw) -> "DetectionConfig":
        base = dict(
            efficiency_s=1.0, efficiency_s2=1.0, efficiency_i=1.0,
            transmittance_s=1.0, transmittance_i=1.0, resolution=0.0, jitter_model="none",
        )
        base.update(kw)
        return cls(**base)


@dataclass
class EventStream:
    times: np.ndarray  # int64 ps, non-decreasing
    channels: np.ndarray  # uint8
    duration: float
    seed: int | None = None
    pair_ids: np.ndarray | None = None  # -1 for background

    def __len__(self) -> int:
        return int(self.times.size)

    def channel_times(self, *channels) -> np.ndarray:
        mask = np.isin(self.channels, channels)
        return self.times[mask]

    def count(self, channel) -> int:
        return int(np.count_nonzero(self.channels == channel))

    def rate(self, *channels) -> float:
        return int(np.count_nonzero(np.isin(self.channels, channels))) / self.duration

    def to_binary(self, path) -> Path:
        """Flat little-endian records: u64 picosecond timestamp, u8 channel."""
        rec = np.empty(self.times.size, dtype=RECORD_DTYPE)
        rec["t"] = self.times
        rec["ch"] = self.channels
        path = Path(path)
        path.write_bytes(rec.tobytes())
        return path

    @classmethod
    def from_binary(cls, path, duration: float | None = None, seed=None) -> "EventStream":
        rec = np.frombuffer(Path(path).read_bytes(), dtype=RECORD_DTYPE)
        times = rec["t"].astype(np.int64)
        if duration is None:
            duration = float(times[-1]) / PS if times.size else 0.0
        return cls(times, rec["ch"].copy(), duration, seed)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_ps", "channel"])
            w.writerows(zip(self.times.tolist(), self.channels.tolist()))
        return path


def _jitter(rng, n, d: DetectionConfig):
    if d.jitter_model == "none" or d.resolution == 0:
        return np.zeros(n)
    if d.jitter_model == "uniform":
        return rng.uniform(-0.5, 0.5, n) * d.resolution * PS
    return rng.normal(0.0, d.jitter_sigma * PS, n)


def _simulate_chunk(p: BiphotonParams, d: DetectionConfig, start: float, stop: float, seed: int, index: int):
    rng = np.random.default_rng([seed, index])
    span = stop - start
    n = rng.poisson(p.pair_rate * span)
    t_i = (start + rng.random(n) * span) * PS
    neg = rng.random(n) >= positive_mass(p.gamma_s, p.gamma_i)
    delay = rng.exponential(1.0, n) * np.where(neg, -PS / p.gamma_s, PS / p.gamma_i)
    t_s = t_i + delay

    idler_ok = rng.random(n) < d.efficiency_i * d.transmittance_i
    to_first = rng.random(n) < d.splitter_ratio
    eff = np.where(to_first, d.efficiency_s, d.efficiency_s2)
    signal_ok = rng.random(n) < d.transmittance_s * eff
    ids = np.arange(n, dtype=np.int64)

    times = [t_i[idler_ok], t_s[signal_ok]]
    chans = [
        np.full(int(idler_ok.sum()), IDLER, np.uint8),
        np.where(to_first[signal_ok], SIGNAL, SIGNAL2).astype(np.uint8),
    ]
    pids = [ids[idler_ok], ids[signal_ok]]
    for ch, rate in ((SIGNAL, d.background_s), (SIGNAL2, d.background_s2), (IDLER, d.background_i)):
        k = rng.poisson(rate * span)
        times.append((start + rng.random(k) * span) * PS)
        chans.append(np.full(k, ch, np.uint8))
        pids.append(np.full(k, -1, np.int64))
    t = np.concatenate(times)
    t = t + _jitter(rng, t.size, d)
    return t, np.concatenate(chans), np.concatenate(pids), n


def _dead_time_filter(times: np.ndarray, dead_ps: int) -> np.ndarray:
    """Indices kept by a non-paralysable detector with dead time ``dead_ps``."""
    keep = []
    k = 0
    while k < times.size:
        keep.append(k)
        k = int(np.searchsorted(times, times[k] + dead_ps, side="left"))
    return np.asarray(keep, dtype=np.int64)


def simulate_stream(
    p: BiphotonParams,
    d: DetectionConfig,
    duration: float,
    seed: int,
    chunk: float = 1.0,
    workers: int = 1,
) -> EventStream:
    """Simulated detector time tags for a heralded pair source.

    The run is cut into fixed ``chunk``-second segments, each with its own
    generator seeded by (seed, segment index), so the output does not depend
    on ``workers``.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    n_chunks = max(1, int(math.ceil(duration / chunk - 1e-12)))
    bounds = [(k * chunk, min((k + 1) * chunk, duration)) for k in range(n_chunks)]

    def run(k):
        return _simulate_chunk(p, d, bounds[k][0], bounds[k][1], seed, k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(k) for k in range(n_chunks)]

    offset = 0
    ts, cs, ps = [], [], []
    for t, c, pid, n in parts:
        ts.append(t)
        cs.append(c)
        ps.append(np.where(pid >= 0, pid + offset, -1))
        offset += n
    t = np.rint(np.concatenate(ts)).astype(np.int64)
    c = np.concatenate(cs)
    pid = np.concatenate(ps)
    inside = (t >= 0) & (t <= int(round(duration * PS)))
    t, c, pid = t[inside], c[inside], pid[inside]
    order = np.lexsort((c, t))
    t, c, pid = t[order], c[order], pid[order]

    if d.dead_time > 0:
        dead = int(round(d.dead_time * PS))
        keep = np.concatenate([np.flatnonzero(c == ch)[_dead_time_filter(t[c == ch], dead)] for ch in (SIGNAL, SIGNAL2, IDLER)])
        keep.sort()
        t, c, pid = t[keep], c[keep], pid[keep]
    return EventStream(t, c, float(duration), seed, pid)


def simulate_poisson_light(
    herald_rate: float,
    signal_rate: float,
    duration: float,
    seed: int,
    splitter_ratio: float = 0.5,
) -> EventStream:
    """Uncorrelated Poisson heralds and Poisson (coherent-state) signal light."""
    p = BiphotonParams(1.0, 1.0, 0.0, 0.0)
    d = DetectionConfig.ideal(
        background_s=signal_rate * splitter_ratio,
        background_s2=signal_rate * (1 - splitter_ratio),
        background_i=herald_rate,
    )
    return simulate_stream(p, d, duration, seed)


@dataclass
class CoincidenceHistogram:
    """Counts of t_signal - t_idler per delay bin."""

    edges: np.ndarray  # s
    counts: np.ndarray
    bin_width: float
    duration: float
    n_pairs: int

    @property
    def tau(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def values(self) -> np.ndarray:
        return self.counts

    @property
    def step(self) -> float:
        return self.bin_width

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_ns", "counts"])
            for t, n in zip(self.tau, self.counts):
                w.writerow([f"{t * 1e9:.6f}", int(n)])
        return path


def coincidence_histogram(
    stream: EventStream,
    bin_width: float,
    window: float,
    signal_channels=(SIGNAL, SIGNAL2),
    idler_channel: int = IDLER,
) -> CoincidenceHistogram:
    """Histogram of signal - idler delays in [-window, window).

    Sorted sweep: each herald locates its neighbourhood by binary search,
    then delays are gathered rank by rank, O(N log N + pairs).
    """
    b = int(round(bin_width * PS))
    w = int(round(window * PS))
    if b <= 0:
        raise ValueError("bin width must be at least 1 ps")
    nbins = max(1, int(round(2 * w / b)))
    lo_edge, hi_edge = -w, -w + nbins * b
    counts = np.zeros(nbins, dtype=np.int64)
    S = stream.channel_times(*signal_channels)
    I = stream.channel_times(idler_channel)
    total = 0
    if S.size and I.size:
        lo = np.searchsorted(S, I + lo_edge, side="left")
        hi = np.searchsorted(S, I + hi_edge, side="left")
        c = hi - lo
        total = int(c.sum())
        active = np.flatnonzero(c > 0)
        rank = 0
        while active.size:
            d = S[lo[active] + rank] - I[active]
            counts += np.bincount((d - lo_edge) // b, minlength=nbins)
            rank += 1
            active = active[c[active] > rank]
    edges = (lo_edge + b * np.arange(nbins + 1)) / PS
    return CoincidenceHistogram(edges, counts, b / PS, stream.duration, total)


def alpha_2d(rate, rate_s: float, rate_i: float, tau_c: float):
    """Two-detector parameter R / (tau_c R_s R_i); R may be an array of per-bin rates."""
    if not (rate_s > 0 and rate_i > 0):
        raise UndefinedEstimatorError("alpha_2d needs positive singles rates")
    if not tau_c > 0:
        raise UndefinedEstimatorError("alpha_2d needs a positive coincidence window")
    return np.asarray(rate, dtype=float) / (tau_c * rate_s * rate_i)


@dataclass
class CountSummary:
    rate_s: float
    rate_i: float
    rate_si: float
    rate_s2i: float
    rate_ss2i: float
    n_i: int
    n_si: int
    n_s2i: int
    n_ss2i: int
    duration: float
    tau_c: float
    alpha_3d: float | None = None
    alpha_3d_err: float | None = None
    alpha_2d: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = asdict(self)
        if self.alpha_2d is not None:
            out["alpha_2d"] = [float(v) for v in self.alpha_2d]
        return out


def _any_in_window(S: np.ndarray, I: np.ndarray, half: int) -> np.ndarray:
    return np.searchsorted(S, I + half, side="right") > np.searchsorted(S, I - half, side="left")


def count_summary(stream: EventStream, tau_c: float, histogram: CoincidenceHistogram | None = None) -> CountSummary:
    """Singles, herald-conditioned coincidence rates and both estimators.

    Coincidences are counted in a window tau_c centred on each herald. The
    signal singles rate sums both signal detectors. If ``histogram`` is
    given the per-bin alpha_2d trace uses its bin width as tau_c.
    """
    half = int(round(0.5 * tau_c * PS))
    I = stream.channel_times(IDLER)
    s1 = _any_in_window(stream.channel_times(SIGNAL), I, half)
    s2 = _any_in_window(stream.channel_times(SIGNAL2), I, half)
    T = stream.duration
    n_i, n_si, n_s2i, n_ss2i = int(I.size), int(s1.sum()), int(s2.sum()), int((s1 & s2).sum())
    summary = CountSummary(
        rate_s=stream.rate(SIGNAL, SIGNAL2),
        rate_i=n_i / T,
        rate_si=n_si / T,
        rate_s2i=n_s2i / T,
        rate_ss2i=n_ss2i / T,
        n_i=n_i,
        n_si=n_si,
        n_s2i=n_s2i,
        n_ss2i=n_ss2i,
        duration=T,
        tau_c=tau_c,
    )
    if n_si and n_s2i:
        summary.alpha_3d = alpha_3d(summary)
        summary.alpha_3d_err = summary.alpha_3d * math.sqrt(
            (1.0 / n_ss2i if n_ss2i else 1.0) + 1.0 / n_si + 1.0 / n_s2i
        )
    if histogram is not None and summary.rate_s > 0 and summary.rate_i > 0:
        summary.alpha_2d = alpha_2d(histogram.counts / T, summary.rate_s, summary.rate_i, histogram.bin_width)
    return summary


def alpha_3d(summary: CountSummary) -> float:
    """Heralded three-detector parameter R_ss'i R_i / (R_si R_s'i)."""
    if summary.n_i == 0:
        raise UndefinedEstimatorError("no heralds")
    if summary.n_si == 0 or summary.n_s2i == 0:
        raise UndefinedEstimatorError("need heralded counts on both signal detectors")
    return summary.n_ss2i * summary.n_i / (summary.n_si * summary.n_s2i)


# --- fitting -----------------------------------------------------------------


def _branch(u, gamma, sigma):
    """Unit-amplitude exp(-gamma u) on u > 0 convolved with N(0, sigma)."""
    if sigma == 0:
        return np.where(u >= 0, np.exp(-gamma * np.maximum(u, 0.0)), 0.0)
    x = (gamma * sigma - u / sigma) / math.sqrt(2.0)
    safe = x >= 0
    out = np.empty_like(u)
    out[safe] = 0.5 * np.exp(-0.5 * (u[safe] / sigma) ** 2) * erfcx(x[safe])
    us = u[~safe]
    out[~safe] = 0.5 * np.exp(-gamma * us + 0.5 * (gamma * sigma) ** 2) * erfc(x[~safe])
    return out


def jittered_density(tau, gamma_s: float, gamma_i: float, sigma: float = 0.0):
    """Unit-area delay density convolved with Gaussian timing noise of width ``sigma``."""
    tau = np.asarray(tau, dtype=float)
    peak = 1.0 / (1.0 / gamma_s + 1.0 / gamma_i)
    return peak * (_branch(tau, gamma_i, sigma) + _branch(-tau, gamma_s, sigma))


def bin_probabilities(edges, gamma_s: float, gamma_i: float, sigma: float = 0.0) -> np.ndarray:
    """Probability mass of the delay density in each bin."""
    edges = np.asarray(edges, dtype=float)
    if sigma == 0:
        return np.diff(density_cdf(edges, gamma_s, gamma_i))
    # Simpson on each bin
    a, b = edges[:-1], edges[1:]
    m = 0.5 * (a + b)
    f = lambda x: jittered_density(x, gamma_s, gamma_i, sigma)
    return (b - a) / 6.0 * (f(a) + 4 * f(m) + f(b))


@dataclass
class FitResult:
    gamma_s: float
    gamma_i: float
    correlated: float
    background: float
    gamma_s_err: float
    gamma_i_err: float
    deviance: float
    dof: int

    @property
    def bandwidth(self) -> float:
        from .biphoton import bandwidth

        return bandwidth(self.gamma_s, self.gamma_i)


def fit_histogram(hist: CoincidenceHistogram, sigma: float = 0.0) -> FitResult:
    """Poisson maximum-likelihood fit of correlated counts, both decay rates and a flat floor."""
    n = hist.counts.astype(float)
    tau = hist.tau
    edges = hist.edges
    # starting values from the data
    floor0 = max(float(np.median(np.concatenate([n[:5], n[-5:]]))), 0.0)
    excess = np.clip(n - floor0, 0, None)
    left, right = tau < 0, tau > 0
    g0 = []
    for side in (left, right):
        wsum = excess[side].sum()
        mean = (np.abs(tau[side]) * excess[side]).sum() / wsum if wsum > 0 else 20e-9
        g0.append(1.0 / max(mean, 1e-10))
    N0 = max(excess.sum(), 1.0)
    scale = np.array([N0, g0[0], g0[1], max(floor0, 1.0)])

    def model(x):
        N, gs, gi, B = x * scale
        return N * bin_probabilities(edges, gs, gi, sigma) + B

    def resid(x):
        mu = np.maximum(model(x), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(n > 0, n * np.log(n / mu), 0.0)
        dev = np.maximum(2.0 * (mu - n + term), 0.0)
        return np.sign(n - mu) * np.sqrt(dev)

    res = least_squares(resid, np.ones(4), bounds=([0, 1e-3, 1e-3, 0], [np.inf, 1e3, 1e3, np.inf]), x_scale="jac")
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
        err = np.sqrt(np.clip(np.diag(cov), 0, None)) * scale
    except np.linalg.LinAlgError:
        err = np.full(4, np.nan)
    N, gs, gi, B = res.x * scale
    return FitResult(
        gamma_s=float(gs), gamma_i=float(gi), correlated=float(N), background=float(B),
        gamma_s_err=float(err[1]), gamma_i_err=float(err[2]),
        deviance=float(2 * res.cost), dof=int(n.size - 4),
    )


def summary_to_json(summary: CountSummary, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
    return path
