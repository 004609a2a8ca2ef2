"""TOML configuration: loading, preset overlays, validation and hashing.

The shipped ``data/default.toml`` doubles as the schema: every key it holds
is the complete set of accepted keys, and its value fixes the expected type.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .biphoton import BiphotonParams
from .crystal import CrystalSpec
from .modulation import ModulationProfile, square_preset
from .stats import DetectionConfig
from .vapor import VaporCellSpec

SCENARIOS = ("fig1c", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "custom")
TOP_LEVEL = ("scenario", "seed", "out", "formats")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


def _data_text(name: str) -> str:
    return resources.files("cavityspdc").joinpath("data", name).read_text()


def default_tree() -> dict:
    return tomllib.loads(_data_text("default.toml"))


def preset_tree(scenario: str) -> dict:
    if scenario == "custom":
        return {"scenario": "custom"}
    if scenario not in SCENARIOS:
        raise KeyError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    return tomllib.loads(_data_text(f"presets/{scenario}.toml"))


def merge(base: dict, overlay: dict) -> dict:
    """Recursive dict overlay; tables merge, everything else replaces."""
    out = copy.deepcopy(base)
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(tree: dict, path: str, value) -> dict:
    """Copy of ``tree`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(tree)
    node = out
    parts = path.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise KeyError(f"{path}: {p} is not a table")
    node[parts[-1]] = value
    return out


def get_path(tree: dict, path: str):
    node = tree
    for p in path.split("."):
        node = node[p]
    return node


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    out: str
    formats: list[str]
    params: dict = field(default_factory=dict)

    def tree(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "out": self.out, "formats": list(self.formats), **self.params}

    def section(self, name: str) -> dict:
        return self.params[name]


def from_tree(tree: dict) -> ScenarioConfig:
    params = {k: v for k, v in tree.items() if k not in TOP_LEVEL}
    return ScenarioConfig(
        scenario=tree.get("scenario", "custom"),
        seed=tree.get("seed", 0),
        out=tree.get("out", "results"),
        formats=list(tree.get("formats", ["csv"])),
        params=params,
    )


def load_config(path=None, scenario: str | None = None) -> ScenarioConfig:
    """Base defaults, then the scenario preset, then the user file.

    The scenario comes from ``scenario`` if given, else from the user file.
    """
    tree = default_tree()
    user = {}
    if path is not None:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    name = scenario or user.get("scenario", "custom")
    if name in SCENARIOS:
        tree = merge(tree, preset_tree(name))
    tree = merge(tree, user)
    tree["scenario"] = name
    return from_tree(tree)


# --- validation ------------------------------------------------------------


def _type_name(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    if isinstance(v, dict):
        return "table"
    return type(v).__name__


def _schema_problems(tree: dict, schema: dict, prefix: str = "") -> list[str]:
    out = []
    for k, v in tree.items():
        name = f"{prefix}{k}"
        if k not in schema:
            out.append(f"{name}: unknown key")
            continue
        want, got = _type_name(schema[k]), _type_name(v)
        if want != got:
            out.append(f"{name} must be a {want}, got {got} {v!r}")
        elif want == "table":
            out.extend(_schema_problems(v, schema[k], name + "."))
        elif want == "number" and not math.isfinite(v):
            out.append(f"{name} must be finite, got {v}")
        elif want == "list" and schema[k] and any(_type_name(x) != _type_name(schema[k][0]) for x in v):
            out.append(f"{name} entries must be {_type_name(schema[k][0])}s")
    return out


def crystal_spec(cfg: ScenarioConfig) -> CrystalSpec:
    s = cfg.section("crystal")
    return CrystalSpec(
        length=float(s["length_m"]),
        poling_period=float(s["poling_period_m"]),
        temperature=float(s["temperature_k"]),
        reference_temperature=float(s["reference_temperature_k"]),
        tuning_coefficient=float(s["tuning_coefficient_hz_per_k"]),
        pump_wavelength=float(s["pump_wavelength_m"]),
        double_pass=bool(s["double_pass"]),
        signal_axis=s["signal_axis"],
        idler_axis=s["idler_axis"],
        degeneracy_offset=float(s["degeneracy_offset_hz"]),
        fd_step=float(s["fd_step_m"]),
    )


def biphoton_params(cfg: ScenarioConfig, pump_power: float | None = None) -> BiphotonParams:
    s = cfg.section("biphoton")
    P = float(s["pump_power_w"]) if pump_power is None else pump_power
    return BiphotonParams.from_pump(P, float(s["calibration_pairs_per_s_per_w"]), float(s["gamma_s_per_s"]), float(s["gamma_i_per_s"]))


def detection_config(cfg: ScenarioConfig) -> DetectionConfig:
    s = cfg.section("detection")
    return DetectionConfig(
        efficiency_s=float(s["efficiency_s"]),
        efficiency_s2=float(s["efficiency_s2"]),
        efficiency_i=float(s["efficiency_i"]),
        transmittance_s=float(s["transmittance_s"]),
        transmittance_i=float(s["transmittance_i"]),
        resolution=float(s["resolution_s"]),
        jitter_model=s["jitter_model"],
        coincidence_window=float(s["coincidence_window_s"]),
        background_s=float(s["background_s_cps"]),
        background_s2=float(s["background_s2_cps"]),
        background_i=float(s["background_i_cps"]),
        splitter_ratio=float(s["splitter_ratio"]),
        dead_time=float(s["dead_time_s"]),
    )


def waveform_bounds(cfg: ScenarioConfig) -> tuple[float, float]:
    s = cfg.section("biphoton")
    k = float(s["window_decays"])
    return (-k / float(s["gamma_s_per_s"]), k / float(s["gamma_i_per_s"]))


def modulation_profile(cfg: ScenarioConfig) -> ModulationProfile:
    s = cfg.section("modulation")
    kind = s["kind"]
    if kind == "square" and float(s["period_s"]) == 0.0 and int(s["count"]) > 0:
        base = square_preset(waveform_bounds(cfg), int(s["count"]), float(s["duty"]))
        from dataclasses import replace

        return replace(base, latency=float(s["latency_s"]))
    return ModulationProfile(
        kind=kind,
        period=float(s["period_s"]),
        duty=float(s["duty"]),
        count=int(s["count"]),
        offset=float(s["offset_s"]),
        edge=float(s["edge_s"]),
        sense=s["sense"],
        grid=tuple(float(x) for x in s["grid_s"]),
        amplitude=tuple(float(x) for x in s["amplitude"]),
        latency=float(s["latency_s"]),
    )


def cell_spec(cfg: ScenarioConfig) -> VaporCellSpec:
    s = cfg.section("cell")
    return VaporCellSpec(
        length=float(s["length_m"]),
        temperature=float(s["temperature_k"]),
        fraction_85=float(s["fraction_85"]),
        fraction_87=float(s["fraction_87"]),
        window_transmission=float(s["window_transmission"]),
        field=float(s["field_t"]),
        nonuniformity=float(s["nonuniformity"]),
        average_nonuniformity=bool(s["average_nonuniformity"]),
        g_eff=float(s["g_eff"]),
    )


def _range_problems(s: dict, section: str, start: str, stop: str, step: str | None = None, points: str | None = None) -> list[str]:
    out = []
    if not s[stop] > s[start]:
        out.append(f"{section}.{stop} must exceed {section}.{start}")
    if step is not None and not s[step] > 0:
        out.append(f"{section}.{step} must be > 0, got {s[step]}")
    if points is not None and (not float(s[points]).is_integer() or s[points] < 2):
        out.append(f"{section}.{points} must be an integer >= 2, got {s[points]}")
    return out


def validate_config(cfg: ScenarioConfig | dict) -> list[str]:
    """Every violated invariant, as human-readable strings. Empty means valid."""
    tree = cfg.tree() if isinstance(cfg, ScenarioConfig) else cfg
    schema = default_tree()
    out = _schema_problems(tree, schema)
    if out:
        return out
    cfg = from_tree(tree)
    if cfg.scenario not in SCENARIOS:
        out.append(f"scenario must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    if not float(cfg.seed).is_integer() or cfg.seed < 0:
        out.append(f"seed must be a non-negative integer, got {cfg.seed}")
    for f in cfg.formats:
        if f not in FORMATS:
            out.append(f"formats entries must be csv or json, got {f!r}")

    out.extend(crystal_spec(cfg).problems())

    b = cfg.section("biphoton")
    for k in ("gamma_s_per_s", "gamma_i_per_s", "step_s", "window_decays"):
        if not b[k] > 0:
            out.append(f"biphoton.{k} must be > 0, got {b[k]}")
    for k in ("pump_power_w", "calibration_pairs_per_s_per_w"):
        if b[k] < 0:
            out.append(f"biphoton.{k} must be >= 0, got {b[k]}")
    if b["window_decays"] > 0 and 1 - math.exp(-b["window_decays"]) < 0.9999:
        out.append(f"biphoton.window_decays must be >= {math.log(1e4):.3f} to capture 99.99% of the density")

    out.extend(detection_config(cfg).problems())
    d = cfg.section("detection")
    for k in ("duration_s", "chunk_s", "bin_width_s", "histogram_window_s"):
        if not d[k] > 0:
            out.append(f"detection.{k} must be > 0, got {d[k]}")
    if not float(d["workers"]).is_integer() or d["workers"] < 1:
        out.append(f"detection.workers must be an integer >= 1, got {d['workers']}")
    if any(p < 0 for p in d["pump_sweep_w"]):
        out.append("detection.pump_sweep_w entries must be >= 0")

    m = cfg.section("modulation")
    if not float(m["count"]).is_integer():
        out.append(f"modulation.count must be an integer, got {m['count']}")
    elif b["gamma_s_per_s"] > 0 and b["gamma_i_per_s"] > 0:
        out.extend(modulation_profile(cfg).problems())

    c = cfg.section("combs")
    out.extend(_range_problems(c, "combs", "scan_start_k", "scan_stop_k", step="scan_step_k"))
    for k in ("peak_rate_cps", "floor_cps"):
        if c[k] < 0:
            out.append(f"combs.{k} must be >= 0, got {c[k]}")

    out.extend(cell_spec(cfg).problems())
    s = cfg.section("cell")
    out.extend(_range_problems(s, "cell", "crystal_scan_start_k", "crystal_scan_stop_k", step="crystal_scan_step_k"))
    out.extend(_range_problems(s, "cell", "temperature_scan_start_k", "temperature_scan_stop_k", points="temperature_scan_points"))
    out.extend(_range_problems(s, "cell", "field_scan_start_t", "field_scan_stop_t", points="field_scan_points"))
    return out


def require_valid(cfg: ScenarioConfig) -> ScenarioConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


# --- hashing ---------------------------------------------------------------


def _canonical(v):
    if isinstance(v, bool) or isinstance(v, str) or v is None:
        return v
    if isinstance(v, (int, float)):
        return repr(float(v))
    if isinstance(v, dict):
        return {k: _canonical(v[k]) for k in sorted(v)}
    if isinstance(v, (list, tuple)):
        return [_canonical(x) for x in v]
    raise TypeError(f"cannot hash {type(v).__name__}")


def config_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 over scenario, seed, formats and the parameter tree.

    Numbers are canonicalised so 1 and 1.0 hash alike; the output directory
    is excluded because it does not change any result.
    """
    payload = {"scenario": cfg.scenario, "seed": cfg.seed, "formats": sorted(cfg.formats), "params": cfg.params}
    blob = json.dumps(_canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def to_toml(tree: dict) -> str:
    """Minimal TOML writer for the two-level trees used here."""

    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, list):
            return "[" + ", ".join(val(x) for x in v) + "]"
        return str(v)

    lines = [f"{k} = {val(v)}" for k, v in tree.items() if not isinstance(v, dict)]
    for k, v in tree.items():
        if isinstance(v, dict):
            lines.append(f"\n[{k}]")
            lines.extend(f"{kk} = {val(vv)}" for kk, vv in v.items())
    return "\n".join(lines) + "\n"
