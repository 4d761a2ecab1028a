"""Command line entry point.

Subcommands:

    run --preset NAME [--trials N] [--seed S] [--out FILE]
    run --config FILE [--trials N] [--seed S] [--out FILE]
    list-presets
    selftest

Exit codes: 0 on success, 1 on runtime failure, 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .channel import NetworkConfig
from .errors import PilotforgeError, UnknownPreset
from .harness import Scenario, emit_csv, list_presets, preset, run_scenario, selftest

_CONFIG_INT_KEYS = ("cells", "users", "bs_antennas", "rf_chains", "tau", "trials", "seed", "dictionary_size")
_CONFIG_FLOAT_KEYS = ("power", "cell_radius", "decay_exponent", "shadow_std_db")
_CONFIG_STR_KEYS = ("name", "profile")
_CONFIG_LIST_KEYS = ("combiners", "pilots")


def _parse_values(text):
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in text.split(","))


def load_scenario_config(path):
    """Parse a key = value scenario file ('#' starts a comment)."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    opts = {}
    sweep_var, sweep_values = None, None
    for key, value in raw.items():
        if key in _CONFIG_INT_KEYS:
            opts[key] = int(value)
        elif key in _CONFIG_FLOAT_KEYS:
            opts[key] = float(value)
        elif key in _CONFIG_STR_KEYS:
            opts[key] = value
        elif key in _CONFIG_LIST_KEYS:
            opts[key] = tuple(x.strip() for x in value.split(",") if x.strip())
        elif key == "sweep":
            var, _, vals = value.partition(":")
            sweep_var = var.strip()
            sweep_values = _parse_values(vals)
        else:
            raise ValueError(f"unknown config key {key!r}")
    for required in ("profile", "cells", "users", "bs_antennas", "rf_chains", "tau", "combiners", "pilots"):
        if required not in opts:
            raise ValueError(f"config is missing required key {required!r}")
    cfg = NetworkConfig(
        cells=opts["cells"],
        users=opts["users"],
        bs_antennas=opts["bs_antennas"],
        rf_chains=opts["rf_chains"],
        pilot_len=opts["tau"],
        power=opts.get("power", 1.0),
    )
    if sweep_var is None:
        sweep_var, sweep_values = "tau", (cfg.pilot_len,)
    scenario = Scenario(
        name=opts.get("name", "custom"),
        cfg=cfg,
        profile_kind=opts["profile"],
        combiner_methods=opts["combiners"],
        pilot_methods=opts["pilots"],
        sweep_var=sweep_var,
        sweep_values=sweep_values,
        trials=opts.get("trials", 2000),
        seed=opts.get("seed", 1),
        cell_radius=opts.get("cell_radius", 1.0),
        decay_exponent=opts.get("decay_exponent", 3.0),
        shadow_std_db=opts.get("shadow_std_db", 8.0),
        dictionary_size=opts.get("dictionary_size", 300),
    )
    scenario.validate()
    return scenario


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pilotforge",
        description="Monte-Carlo workbench for joint pilot and analog combiner design",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario and write a CSV of results")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="name of a built-in scenario")
    src.add_argument("--config", help="path to a key = value scenario file")
    run_p.add_argument("--trials", type=int, help="override the trial count")
    run_p.add_argument("--seed", type=int, help="override the master seed")
    run_p.add_argument("--out", default="results.csv", help="output CSV path")
    sub.add_parser("list-presets", help="print the available preset names")
    sub.add_parser("selftest", help="run the fast invariant suite")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "list-presets":
        for name in list_presets():
            print(name)
        return 0
    if args.command == "selftest":
        failures = selftest()
        if failures:
            print(f"{failures} check(s) failed")
            return 1
        print("all checks passed")
        return 0
    # run
    try:
        if args.preset:
            scenario = preset(args.preset)
        else:
            scenario = load_scenario_config(args.config)
    except (UnknownPreset, ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"pilotforge: {exc}", file=sys.stderr)
        return 2
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        scenario = replace(scenario, **overrides)
    try:
        rows = run_scenario(scenario)
        emit_csv(rows, args.out)
    except (PilotforgeError, ValueError, OSError) as exc:
        print(f"pilotforge: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
