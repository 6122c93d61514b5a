"""Command-line entry point.

    relfrac run --config cfg.json [--out DIR] [--no-plots]
    relfrac validate --config cfg.json
    relfrac list-scenarios

Exit status: 0 = all configured checks passed, 2 = at least one check
failed, 1 = execution or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import scenarios


def main(argv=None):
    parser = argparse.ArgumentParser(prog="relfrac",
                                     description="scenario runner for the "
                                     "relativistic fractional operator toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default: config output_dir)")
    p_run.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("--config", required=True)

    sub.add_parser("list-scenarios", help="print available scenario names")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name in scenarios.SCENARIOS:
            print(name)
        return 0

    if args.command == "validate":
        try:
            problems = scenarios.validate(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for p in problems:
            print(f"problem: {p}")
        if problems:
            return 1
        print("config ok")
        return 0

    # run
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        problems = scenarios.validate_dict(doc)
        if problems:
            for p in problems:
                print(f"problem: {p}", file=sys.stderr)
            return 1
        cfg = scenarios.ScenarioConfig.from_dict(doc)
        status, results = scenarios.run(cfg, out_dir=args.out,
                                        plots=not args.no_plots)
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for chk in results["checks"]:
        mark = "PASS" if chk["passed"] else "FAIL"
        print(f"[{mark}] {chk['name']}: value={chk['value']:.6g} "
              f"tol={chk['tolerance']:.6g} ({chk['mode']})")
    return status


if __name__ == "__main__":
    sys.exit(main())
