"""Command-line scenario runner.

    uavlink run <scenario-or-path> --out DIR [--seed N]
    uavlink compare <scenario-or-path> --out DIR [--seed N]
    uavlink list [--scenario-dir DIR]

Exit codes: 0 ok, 1 invariant breach during the run, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .config import ConfigError, ScenarioConfig, parse_scenario_file, parse_scenario_text
from .engine import SchedulingError
from .link import TraceError
from .sim import compare_scenario, run_scenario

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def bundled_scenarios() -> Dict[str, str]:
    """Name -> scenario text for every config shipped inside the package."""
    out: Dict[str, str] = {}
    root = resources.files("uavlink").joinpath("scenarios")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".cfg"):
            out[entry.name[:-4]] = entry.read_text(encoding="utf-8")
    return out


def _scenario_description(text: str) -> str:
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#"):
            return line.lstrip("# ").strip()
        if line:
            break
    return ""


def list_scenarios(custom_dir: Optional[str] = None) -> List[Tuple[str, str]]:
    entries: Dict[str, str] = {}
    for name, text in bundled_scenarios().items():
        entries[name] = _scenario_description(text)
    if custom_dir:
        for path in sorted(Path(custom_dir).glob("*.cfg")):
            name = path.stem
            if name in entries:
                raise ConfigError(f"duplicate scenario name: {name}")
            entries[name] = _scenario_description(path.read_text(encoding="utf-8"))
    return sorted(entries.items())


def resolve_scenario(ref: str, seed: Optional[int]) -> Tuple[ScenarioConfig, str]:
    overrides = {"seed": str(seed)} if seed is not None else None
    bundled = bundled_scenarios()
    if ref in bundled:
        return parse_scenario_text(bundled[ref], overrides), ref
    path = Path(ref)
    if path.exists():
        return parse_scenario_file(str(path), overrides), path.stem
    raise ConfigError(
        f"no such scenario: {ref!r} (not a bundled name, not a readable file)")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg, name = resolve_scenario(args.scenario, args.seed)
    result = run_scenario(cfg, name)
    report_path, series_path = result.write(args.out, stem=name)
    c2 = result.report["summary"]["c2"]
    print(f"scenario {name}: wrote {report_path} and {series_path}")
    print(f"  c2: delivered {c2['unique_received']}/{c2['expected']} "
          f"plr={c2['plr']:.4f} mean_latency="
          f"{c2['latency'].get('mean_ms', float('nan')):.2f} ms")
    for h in result.report["summary"]["handovers"]:
        print(f"  handover at {h['start_ms']:.0f} ms ({h['effective_mode']}): "
              f"w_cb={h['w_cb_ms']} ms")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg, name = resolve_scenario(args.scenario, args.seed)
    paired, res_a, res_b = compare_scenario(cfg, name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res_a.write(args.out, stem=f"{name}_strict")
    res_b.write(args.out, stem=f"{name}_fifo")
    paired_path = out / f"{name}_compare.json"
    paired_path.write_text(json.dumps(paired, sort_keys=True, indent=2) + "\n",
                           encoding="utf-8")
    ratio = paired["c2_latency_ratio"]
    print(f"scenario {name}: wrote {paired_path}")
    print(f"  c2 latency ratio (fifo+isolated / strict+unified): "
          f"{ratio:.1f}x" if ratio else "  c2 latency ratio unavailable")
    return EXIT_OK


def _cmd_list(args: argparse.Namespace) -> int:
    for name, desc in list_scenarios(args.scenario_dir):
        print(f"{name:20s} {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavlink",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one scenario and write reports")
    run_p.add_argument("scenario", help="bundled scenario name or config path")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.set_defaults(fn=_cmd_run)

    cmp_p = sub.add_parser("compare",
                           help="run strict+unified vs fifo+isolated, same seed")
    cmp_p.add_argument("scenario")
    cmp_p.add_argument("--out", required=True)
    cmp_p.add_argument("--seed", type=int, default=None)
    cmp_p.set_defaults(fn=_cmd_compare)

    list_p = sub.add_parser("list", help="list available scenarios")
    list_p.add_argument("--scenario-dir", default=None,
                        help="also scan this directory for *.cfg")
    list_p.set_defaults(fn=_cmd_list)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AssertionError, SchedulingError) as e:
        print(f"invariant breach: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
