"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, MemoryGuardError, NumericalInvariantError
from .harness import (
    SCENARIO_SUMMARIES,
    SCENARIOS,
    default_config,
    load_config,
    run_experiment,
    with_overrides,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qchaos",
        description="Run chaoticity experiments for mean-field quantum dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", help="path to the config JSON file")
    run.add_argument("--out", dest="out", default=None, help="output directory")
    run.add_argument("--seed", dest="seed", type=int, default=None, help="seed override")
    run.add_argument("--quiet", action="store_true", help="suppress progress logs")

    sub.add_parser("list-scenarios", help="list scenario ids")

    describe = sub.add_parser("describe", help="show a scenario and its defaults")
    describe.add_argument("scenario", help="scenario id")

    validate = sub.add_parser("validate", help="validate a JSON config")
    validate.add_argument("config", help="path to the config JSON file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-scenarios":
            for name in SCENARIOS:
                print(f"{name}: {SCENARIO_SUMMARIES[name]}")
            return 0
        if args.command == "describe":
            if args.scenario not in SCENARIOS:
                raise ConfigError(
                    f"unknown scenario {args.scenario!r}; choose from {list(SCENARIOS)}"
                )
            print(SCENARIO_SUMMARIES[args.scenario])
            print(json.dumps(default_config(args.scenario).to_dict(), indent=2, sort_keys=True))
            return 0
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg.scenario} (config hash {cfg.config_hash()})")
            return 0
        # run
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, out_dir=args.out, seed=args.seed)
        result = run_experiment(cfg, quiet=args.quiet)
        if not args.quiet:
            for name in sorted(result.profiles):
                profile = result.profiles[name]
                pts = " ".join(f"({n},{dist:.3e})" for n, dist in profile.points)
                print(f"{name} [{profile.norm}]: {pts}")
            for path in result.files:
                print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MemoryGuardError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalInvariantError as exc:
        print(f"numerical invariant failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
