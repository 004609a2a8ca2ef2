"""Command line: ``simulate``, ``validate`` and ``sweep``.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .config import SCENARIOS, ConfigError, from_tree, load_config, set_path, validate_config
from .scenarios import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# shortcut flags: (dest, dotted config path, scale applied to the flag value)
SHORTCUTS = (
    ("duration", "detection.duration_s", 1.0),
    ("pump_uw", "biphoton.pump_power_w", 1e-6),
    ("bin_ps", "detection.bin_width_s", 1e-12),
    ("window_ns", "detection.histogram_window_s", 1e-9),
    ("tau_c_ns", "detection.coincidence_window_s", 1e-9),
)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_values(text: str) -> list:
    text = text.strip()
    if text.startswith("["):
        return list(json.loads(text))
    return [_parse_value(v.strip()) for v in text.split(",") if v.strip()]


def _build(args) -> "ScenarioConfig":
    cfg = load_config(args.config, scenario=getattr(args, "scenario", None))
    tree = cfg.tree()
    if getattr(args, "seed", None) is not None:
        tree["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        tree["out"] = args.out
    if getattr(args, "format", None) is not None:
        tree["formats"] = [args.format]
    for dest, path, scale in SHORTCUTS:
        v = getattr(args, dest, None)
        if v is not None:
            tree = set_path(tree, path, v * scale)
    for item in getattr(args, "set", None) or []:
        key, _, value = item.partition("=")
        tree = set_path(tree, key.strip(), _parse_value(value.strip()))
    return from_tree(tree)


def _report(problems: list[str]) -> None:
    print(f"configuration invalid ({len(problems)} problem{'s' if len(problems) != 1 else ''}):", file=sys.stderr)
    for p in problems:
        print(f"  - {p}", file=sys.stderr)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML file overlaid on the defaults and the scenario preset")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--gnuplot", action="store_true", help="also write a .gp script next to each CSV")
    p.add_argument("--duration", type=float, help="simulated time, s")
    p.add_argument("--pump-uw", type=float, help="pump power, uW")
    p.add_argument("--bin-ps", type=float, help="histogram bin, ps")
    p.add_argument("--window-ns", type=float, help="histogram half-range, ns")
    p.add_argument("--tau-c-ns", type=float, help="coincidence window, ns")
    p.add_argument("--set", action="append", metavar="PATH=VALUE", help="override any key, e.g. cell.field_t=0.01")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavityspdc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("scenario", choices=SCENARIOS)
    _common(sim)

    val = sub.add_parser("validate", help="check a configuration and list every violation")
    val.add_argument("--config", type=Path)
    val.add_argument("--scenario", choices=SCENARIOS)

    sw = sub.add_parser("sweep", help="rerun a scenario over values of one parameter")
    sw.add_argument("scenario", nargs="?", default=None, choices=SCENARIOS)
    sw.add_argument("--param", required=True, help="dotted config path, e.g. biphoton.pump_power_w")
    sw.add_argument("--values", required=True, help="comma-separated list or JSON array")
    _common(sw)
    return ap


def cmd_simulate(args) -> int:
    cfg = _build(args)
    problems = validate_config(cfg)
    if problems:
        _report(problems)
        return EXIT_CONFIG
    manifest = run_scenario(cfg, gnuplot=args.gnuplot)
    print(json.dumps({"out": cfg.out, "config_hash": manifest["config_hash"], "results": manifest["results"]}, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config, scenario=args.scenario)
    problems = validate_config(cfg)
    if problems:
        _report(problems)
        return EXIT_CONFIG
    print("configuration valid")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _build(args)
    values = _parse_values(args.values)
    configs = [from_tree(set_path(base.tree(), args.param, v)) for v in values]
    problems = []
    for v, cfg in zip(values, configs):
        problems.extend(f"[{args.param}={v}] {p}" for p in validate_config(cfg))
    if problems:
        _report(problems)
        return EXIT_CONFIG
    root = Path(base.out)
    rows = []
    for k, (v, cfg) in enumerate(zip(values, configs)):
        m = run_scenario(cfg, out=root / f"point_{k:03d}", gnuplot=args.gnuplot)
        rows.append({"index": k, "value": v, "config_hash": m["config_hash"], "results": m["results"]})
    (root / "sweep.json").write_text(json.dumps({"param": args.param, "points": rows}, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"out": str(root), "points": len(rows)}))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "validate": cmd_validate, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        _report(e.violations)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as e:
        if isinstance(e, FileNotFoundError) or "toml" in type(e).__module__.lower():
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        traceback.print_exc()
        return EXIT_RUNTIME
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
