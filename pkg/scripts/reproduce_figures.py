"""Run every figure scenario with its preset and print the headline numbers.

    python3 scripts/reproduce_figures.py --out results --gnuplot
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from cavityspdc.config import SCENARIOS, load_config, require_valid
from cavityspdc.scenarios import run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--gnuplot", action="store_true")
    ap.add_argument("--only", nargs="*", default=None, help="subset of scenarios")
    args = ap.parse_args()

    names = args.only or [s for s in SCENARIOS if s != "custom"]
    for name in names:
        cfg = load_config(scenario=name)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        require_valid(cfg)
        t0 = time.perf_counter()
        m = run_scenario(cfg, out=args.out / name, gnuplot=args.gnuplot)
        dt = time.perf_counter() - t0
        print(f"== {name} ({dt:.1f} s) -> {args.out / name}")
        print(json.dumps(m["results"], indent=2, default=float))


if __name__ == "__main__":
    main()
