"""Scenario orchestration: one function per figure, all writing plain data.

Every scenario writes its tables (CSV or JSON), the resolved configuration
and a ``manifest.json`` with file hashes, the config hash, package versions
and headline results. Nothing time-dependent is written, so reruns with the
same seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .biphoton import bandwidth, conditional_density, waveform_fwhm
from .combs import (
    build_comb,
    emission_mode,
    mode_hop_spacing,
    scan_peaks,
    temperature_grid,
    temperature_scan,
)
from .config import (
    ScenarioConfig,
    biphoton_params,
    cell_spec,
    config_hash,
    crystal_spec,
    detection_config,
    modulation_profile,
    require_valid,
    to_toml,
    waveform_bounds,
)
from .modulation import apply_to_waveform, support_intervals
from .stats import (
    bin_probabilities,
    coincidence_histogram,
    count_summary,
    fit_histogram,
    simulate_stream,
)
from .vapor import RB_D1, cell_temperature_scan, crystal_temperature_scan, field_scan, find_dips

FIGURES = ("fig1c", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b")


class Writer:
    """Collects output tables in one directory, in one or more formats."""

    def __init__(self, out: Path, formats, gnuplot: bool = False):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.formats = list(formats) or ["csv"]
        self.gnuplot = gnuplot
        self.files: list[Path] = []

    def table(self, stem: str, columns: dict, meta: dict | None = None, plot: tuple[str, str] | None = None):
        cols = {k: np.asarray(v) for k, v in columns.items()}
        n = {len(v) for v in cols.values()}
        if len(n) > 1:
            raise ValueError(f"{stem}: columns of unequal length")
        if "csv" in self.formats:
            path = self.out / f"{stem}.csv"
            lines = [",".join(cols)]
            for row in zip(*cols.values()):
                lines.append(",".join(_fmt(v) for v in row))
            path.write_text("\n".join(lines) + "\n")
            self.files.append(path)
            if self.gnuplot and plot is not None:
                self._gnuplot(stem, list(cols), plot)
        if "json" in self.formats:
            payload = {"columns": {k: [_json_num(x) for x in v.tolist()] for k, v in cols.items()}}
            if meta:
                payload["meta"] = meta
            self.json(stem, payload)

    def json(self, stem: str, payload: dict):
        path = self.out / f"{stem}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self.files.append(path)

    def text(self, name: str, body: str):
        path = self.out / name
        path.write_text(body)
        self.files.append(path)

    def _gnuplot(self, stem: str, names: list[str], plot: tuple[str, str]):
        x, y = plot
        body = (
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            f"set xlabel '{x}'\nset ylabel '{y}'\n"
            f"plot '{stem}.csv' using {names.index(x) + 1}:{names.index(y) + 1} with lines\n"
        )
        self.text(f"{stem}.gp", body)


def _fmt(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return f"{float(v):.12g}"


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    return {"cavityspdc": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


# --- figures -------------------------------------------------------------


def _analytic_singles(p, d):
    """Expected singles rates (signal arm summed over both detectors, idler)."""
    r = d.splitter_ratio
    eta_sig = d.transmittance_s * (r * d.efficiency_s + (1 - r) * d.efficiency_s2)
    eta_idl = d.transmittance_i * d.efficiency_i
    rs = p.pair_rate * eta_sig + d.background_s + d.background_s2
    ri = p.pair_rate * eta_idl + d.background_i
    return eta_sig, eta_idl, rs, ri


def _stream(cfg: ScenarioConfig, p, seed: int):
    d = detection_config(cfg)
    s = cfg.section("detection")
    return simulate_stream(p, d, float(s["duration_s"]), seed, chunk=float(s["chunk_s"]), workers=int(s["workers"]))


def fig1c(cfg: ScenarioConfig, w: Writer) -> dict:
    p = biphoton_params(cfg)
    d = detection_config(cfg)
    s = cfg.section("detection")
    stream = _stream(cfg, p, cfg.seed)
    hist = coincidence_histogram(stream, float(s["bin_width_s"]), float(s["histogram_window_s"]))
    summary = count_summary(stream, d.coincidence_window, hist)
    sigma = d.jitter_sigma if d.jitter_model == "gaussian" else 0.0
    fit = fit_histogram(hist, sigma)

    eta_sig, eta_idl, rs, ri = _analytic_singles(p, d)
    T = stream.duration
    expected = p.pair_rate * eta_sig * eta_idl * T * bin_probabilities(hist.edges, p.gamma_s, p.gamma_i, sigma)
    expected = expected + rs * ri * hist.bin_width * T
    w.table("histogram", {"tau_ns": hist.tau * 1e9, "counts": hist.counts}, plot=("tau_ns", "counts"))
    w.table("overlay", {"tau_ns": hist.tau * 1e9, "expected_counts": expected}, plot=("tau_ns", "expected_counts"))
    w.table("alpha2d", {"tau_ns": hist.tau * 1e9, "alpha_2d": summary.alpha_2d}, plot=("tau_ns", "alpha_2d"))

    powers = [float(x) for x in s["pump_sweep_w"]]
    a3, a3e = [], []
    for k, P in enumerate(powers):
        sk = count_summary(_stream(cfg, biphoton_params(cfg, P), cfg.seed + 1 + k), d.coincidence_window)
        a3.append(np.nan if sk.alpha_3d is None else sk.alpha_3d)
        a3e.append(np.nan if sk.alpha_3d_err is None else sk.alpha_3d_err)
    w.table(
        "alpha3d_vs_pump",
        {"pump_uW": np.array(powers) * 1e6, "alpha_3d": np.array(a3), "alpha_3d_err": np.array(a3e)},
        plot=("pump_uW", "alpha_3d"),
    )
    near = np.abs(hist.tau) < 50e-9
    summary_json = summary.to_json()
    summary_json.pop("alpha_2d", None)
    w.json("summary", summary_json)
    return {
        "fitted_gamma_s_per_s": fit.gamma_s,
        "fitted_gamma_i_per_s": fit.gamma_i,
        "fitted_decay_time_s_ns": 1e9 / fit.gamma_s,
        "fitted_decay_time_i_ns": 1e9 / fit.gamma_i,
        "fitted_bandwidth_hz": fit.bandwidth,
        "alpha_3d": summary.alpha_3d,
        "alpha_3d_err": summary.alpha_3d_err,
        "alpha_2d_min_within_50ns": float(np.min(summary.alpha_2d[near])),
        "alpha_3d_vs_pump": [_json_num(float(v)) for v in a3],
        "rate_s_cps": summary.rate_s,
        "rate_i_cps": summary.rate_i,
        "rate_si_cps": summary.rate_si + summary.rate_s2i,
    }


def _fig2(cfg: ScenarioConfig, w: Writer) -> dict:
    p = biphoton_params(cfg)
    b = cfg.section("biphoton")
    wf = conditional_density(p, waveform_bounds(cfg), float(b["step_s"]))
    mod = apply_to_waveform(wf, modulation_profile(cfg))
    w.table("waveform", {"tau_ns": wf.tau * 1e9, "density": wf.values}, plot=("tau_ns", "density"))
    w.table("modulated", {"tau_ns": mod.tau * 1e9, "density": mod.values}, plot=("tau_ns", "density"))
    intervals = support_intervals(mod)
    return {
        "support_intervals_ns": [[a * 1e9, b * 1e9] for a, b in intervals],
        "n_support_intervals": len(intervals),
        "waveform_fwhm_ns": waveform_fwhm(wf) * 1e9,
        "transmitted_fraction": float(np.sum(mod.values) * mod.step),
    }


def _combs(cfg: ScenarioConfig):
    crystal = crystal_spec(cfg)
    b = cfg.section("biphoton")
    sig = build_comb(crystal, crystal.signal_axis, float(b["gamma_s_per_s"]))
    idl = build_comb(crystal, crystal.idler_axis, float(b["gamma_i_per_s"]))
    return crystal, sig, idl


def fig3a(cfg: ScenarioConfig, w: Writer) -> dict:
    crystal, sig, idl = _combs(cfg)
    c = cfg.section("combs")
    T = temperature_grid(float(c["scan_start_k"]), float(c["scan_stop_k"]), float(c["scan_step_k"]))
    scan = temperature_scan(crystal, sig, idl, T, float(c["peak_rate_cps"]), float(c["floor_cps"]))
    w.table(
        "temperature_scan",
        {
            "T_K": scan.temperature,
            "rate_cps": scan.rate,
            "selected_signal_index": scan.signal_index,
            "selected_idler_index": scan.idler_index,
            "nu_s_Hz": scan.nu_s,
        },
        plot=("T_K", "rate_cps"),
    )
    peaks = scan.temperature[scan_peaks(scan, float(c["floor_cps"]))]
    return {
        "peak_temperatures_k": peaks.tolist(),
        "peak_spacing_mk": (np.diff(peaks) * 1e3).tolist(),
        "mode_hop_spacing_mk": mode_hop_spacing(sig.fsr - idl.fsr, crystal.tuning_coefficient) * 1e3,
        "fsr_signal_hz": sig.fsr,
        "fsr_idler_hz": idl.fsr,
    }


def _photon_bandwidth(cfg: ScenarioConfig) -> float:
    b = cfg.section("biphoton")
    return bandwidth(float(b["gamma_s_per_s"]), float(b["gamma_i_per_s"]))


def fig3b(cfg: ScenarioConfig, w: Writer) -> dict:
    crystal, sig, idl = _combs(cfg)
    c, s = cfg.section("combs"), cfg.section("cell")
    cell = cell_spec(cfg)
    T = temperature_grid(float(s["crystal_scan_start_k"]), float(s["crystal_scan_stop_k"]), float(s["crystal_scan_step_k"]))
    scan = crystal_temperature_scan(
        crystal, sig, idl, cell, RB_D1.lines, T, _photon_bandwidth(cfg), float(c["peak_rate_cps"]), float(c["floor_cps"])
    )
    w.table("crystal_temperature_transmittance", {"x": scan.x, "transmittance": scan.transmittance}, plot=("x", "transmittance"))
    w.table(
        "fig3b_modes",
        {
            "T_K": scan.x,
            "signal_index": scan.signal_index,
            "emission_detuning_Hz": scan.emission_detuning,
            "mode_transmittance": scan.mode_transmittance,
            "pair_weight": scan.weight,
        },
    )
    dips = find_dips(scan, cell.window_transmission)
    return {"dips": dips, "n_dips": len(dips), "baseline": float(np.max(scan.transmittance))}


def _emission_detuning(cfg: ScenarioConfig) -> float:
    crystal, sig, idl = _combs(cfg)
    p = emission_mode(crystal, sig, idl, crystal.temperature)
    return p.signal_emission - RB_D1.reference_frequency


def fig4a(cfg: ScenarioConfig, w: Writer) -> dict:
    s = cfg.section("cell")
    T = np.linspace(float(s["temperature_scan_start_k"]), float(s["temperature_scan_stop_k"]), int(s["temperature_scan_points"]))
    det = _emission_detuning(cfg)
    scan = cell_temperature_scan(det, _photon_bandwidth(cfg), cell_spec(cfg), RB_D1.lines, T)
    w.table("cell_temperature_transmittance", {"x": scan.x, "transmittance": scan.transmittance}, plot=("x", "transmittance"))
    return {"photon_detuning_hz": det, "transmittance_first": float(scan.transmittance[0]), "transmittance_last": float(scan.transmittance[-1])}


def fig4b(cfg: ScenarioConfig, w: Writer) -> dict:
    s = cfg.section("cell")
    B = np.linspace(float(s["field_scan_start_t"]), float(s["field_scan_stop_t"]), int(s["field_scan_points"]))
    det = _emission_detuning(cfg)
    scan = field_scan(det, _photon_bandwidth(cfg), cell_spec(cfg), RB_D1.lines, B)
    w.table("field_transmittance", {"x": scan.x, "transmittance": scan.transmittance}, plot=("x", "transmittance"))
    k = int(np.argmin(scan.transmittance))
    return {"photon_detuning_hz": det, "field_at_minimum_t": float(scan.x[k]), "minimum_transmittance": float(scan.transmittance[k])}


RUNNERS = {"fig1c": fig1c, "fig2a": _fig2, "fig2b": _fig2, "fig3a": fig3a, "fig3b": fig3b, "fig4a": fig4a, "fig4b": fig4b}


def run_scenario(cfg: ScenarioConfig, out=None, gnuplot: bool = False) -> dict:
    """Run ``cfg.scenario`` into ``out`` (default ``cfg.out``) and return the manifest.

    ``custom`` runs every figure into its own subdirectory.
    """
    require_valid(cfg)
    out = Path(out if out is not None else cfg.out)
    w = Writer(out, cfg.formats, gnuplot)
    if cfg.scenario == "custom":
        results = {}
        for name in FIGURES:
            sub = Writer(out / name, cfg.formats, gnuplot)
            results[name] = RUNNERS[name](cfg, sub)
            w.files.extend(sub.files)
    else:
        results = RUNNERS[cfg.scenario](cfg, w)
    w.text("config.toml", to_toml(cfg.tree()))
    manifest = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "versions": versions(),
        "files": [{"path": str(f.relative_to(out)), "sha256": _sha256(f)} for f in w.files],
        "results": _clean(results),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **kw)
