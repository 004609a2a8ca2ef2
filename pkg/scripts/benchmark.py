"""Wall-clock timings for the heavy paths: stream generation, histogramming, scenarios."""

import argparse
import tempfile
import time
from pathlib import Path

from cavityspdc.biphoton import BiphotonParams
from cavityspdc.config import load_config
from cavityspdc.scenarios import run_scenario
from cavityspdc.stats import DetectionConfig, coincidence_histogram, count_summary, simulate_stream


def timed(label, fn):
    t0 = time.perf_counter()
    out = fn()
    print(f"{label:<44s} {time.perf_counter() - t0:8.3f} s")
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=float, default=1e7, help="approximate number of time tags")
    ap.add_argument("--no-scenarios", action="store_true")
    args = ap.parse_args()

    rate = 1e6
    duration = args.events / (2 * rate)
    p = BiphotonParams.from_decay_times(20.7e-9, 24.4e-9, rate)
    stream = timed(f"simulate {args.events:.0e} tags (ideal detectors)", lambda: simulate_stream(p, DetectionConfig.ideal(), duration, seed=1))
    timed(f"histogram {len(stream):.3g} tags, 350 ps bins", lambda: coincidence_histogram(stream, 350e-12, 200e-9))
    timed("three-detector counts, 100 ns window", lambda: count_summary(stream, 100e-9))

    if not args.no_scenarios:
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("fig1c", "fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b"):
                timed(f"scenario {name}", lambda: run_scenario(load_config(scenario=name), out=Path(tmp) / name))


if __name__ == "__main__":
    main()
