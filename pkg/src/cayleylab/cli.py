"""Command line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 budget exceeded, 3 invalid config, 4 verdict
failure (for CI gating).
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import BudgetExceededError, InvalidConfigError
from .lab import EXPERIMENTS, load_config, run_experiment

_DEFAULT_GROUPS = {
    "growth": {"kind": "free", "rank": 2},
    "normal-subgroup": {"kind": "free", "rank": 2},
    "grigorchuk": {"kind": "free", "rank": 2},
    "shadow-lemma": {"kind": "free", "rank": 2},
    "spr": {"kind": "free", "rank": 2},
    "horoboundary": {"kind": "free", "rank": 2},
    "poincare": {"kind": "free", "rank": 2},
    "density": {"kind": "free", "rank": 2},
}

_DEFAULT_EXTRAS = {
    "normal-subgroup": {
        "hom": {"target": {"kind": "free_abelian_L1", "dim": 2},
                "images": [[1, 0], [0, 1]]}
    },
    "horoboundary": {
        "families": [
            {"name": "a_power", "kind": "power", "base": "a"},
            {"name": "a_power_b", "kind": "power", "base": "a", "suffix": "b"},
        ]
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cayleylab",
        description="Desk-scale growth and boundary experiments on marked groups",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file (one document per run)")
        p.add_argument("--out", help="output directory for report.json and CSV tables")
        p.add_argument("--radius", type=int, help="override the main radius")
        p.add_argument("--budget", type=int, help="override the element budget")
        p.add_argument("--seed", type=int, help="override the sampling seed")
        p.add_argument("--format", choices=["json", "csv"], default="json",
                       help="csv additionally writes one file per table")
    return parser


def config_from_args(args) -> dict:
    if args.config:
        config = load_config(args.config)
    else:
        config = {"group": dict(_DEFAULT_GROUPS[args.experiment])}
        config.update(_DEFAULT_EXTRAS.get(args.experiment, {}))
    config.setdefault("experiment", args.experiment)
    if config["experiment"] != args.experiment:
        raise InvalidConfigError(
            f"config is for {config['experiment']!r} but the subcommand is {args.experiment!r}"
        )
    for key in ("radius", "budget", "seed"):
        value = getattr(args, key)
        if value is not None:
            config[key] = value
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        report = run_experiment(config)
    except InvalidConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 3
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 2
    if args.out:
        written = report.write(args.out, fmt=args.format)
        for path in written:
            print(f"wrote {path}")
    else:
        print(report.canonical_json(include_runtime=True))
    for verdict in report.verdicts:
        tag = "PASS" if verdict["passed"] else "FAIL"
        if not verdict.get("asserted", True):
            tag = f"{tag} (reported, not gated)"
        print(f"[{tag}] {verdict['statement']}", file=sys.stderr)
    if not report.all_verdicts_pass:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
