"""Command line interface: ``xtalk <scenario> --config <path> [options]``.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
failures.  The environment variable ``XTALK_SEED`` overrides the built-in
default seed; an explicit ``--seed`` flag wins over everything.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, NumericalFailureError
from .scenarios import SCENARIOS, ScenarioConfig, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xtalk",
        description="Crosstalk cancellation scenario runner; emits CSV scan data.",
    )
    parser.add_argument("scenario", choices=SCENARIOS, help="scenario to run")
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--shots", type=int, default=None, help="override the shot count")
    parser.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    parser.add_argument("--workers", type=int, default=1, help="scan-point worker threads")
    return parser


def _default_seed() -> int:
    env = os.environ.get("XTALK_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"XTALK_SEED must be an integer, got {env!r}") from exc


def load_config(path: str, args: argparse.Namespace) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = dict(doc)
    doc["scenario"] = args.scenario
    return ScenarioConfig.from_dict(
        doc,
        seed_override=args.seed,
        shots_override=args.shots,
        out_override=args.out,
        default_seed=_default_seed(),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        result = run_scenario(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if cfg.out:
        result.write_csv(cfg.out)
    else:
        sys.stdout.write(result.to_csv())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
