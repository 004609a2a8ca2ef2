"""Simulation toolkit for a cavity-enhanced, atom-resonant SPDC photon source."""

__version__ = "0.1.0"

from .biphoton import BiphotonParams, bandwidth, conditional_density, generated_brightness
from .combs import build_comb, doubly_resonant_pairs, mode_hop_spacing, select_emission_mode, temperature_scan
from .crystal import CrystalSpec, differential_fsr, fsr, group_index, refractive_index
from .stats import DetectionConfig, coincidence_histogram, count_summary, fit_histogram, simulate_stream
from .vapor import VaporCellSpec, optical_depth, photon_transmittance, transmittance

__all__ = [
    "BiphotonParams",
    "CrystalSpec",
    "DetectionConfig",
    "VaporCellSpec",
    "bandwidth",
    "build_comb",
    "coincidence_histogram",
    "conditional_density",
    "count_summary",
    "differential_fsr",
    "doubly_resonant_pairs",
    "fit_histogram",
    "fsr",
    "generated_brightness",
    "group_index",
    "mode_hop_spacing",
    "optical_depth",
    "photon_transmittance",
    "refractive_index",
    "select_emission_mode",
    "simulate_stream",
    "temperature_scan",
    "transmittance",
]
