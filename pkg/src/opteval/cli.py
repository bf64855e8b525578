"""Command-line experiment runner.

Subcommands:
    run <config>       run the configured study and write results
    oracle <config>    oracle-only pass (empirical value vs true cost)
    validate <config>  parse and validate a config, print the summary
    list-problems      show registered problem names
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ConfigError, OptevalError
from .harness import ExperimentConfig, emit, run_experiment
from .problems import list_problems


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.output is not None:
        config = dataclasses.replace(config, output_path=args.output)
    if args.jobs is not None:
        config = dataclasses.replace(config, jobs=args.jobs)
    return config


def _print_summary(summary: dict) -> None:
    for key, entry in summary.items():
        line = f"{key}: mean={entry['mean']:.6g} (se {entry['stderr']:.2g})"
        if "oracle_bias" in entry:
            line += (
                f"  bias_est={entry['mean_bias_estimate']:.6g}"
                f"  oracle_bias={entry['oracle_bias']:.6g}"
                f" (se {entry['stderr_oracle_bias']:.2g})"
            )
        line += f"  [{entry['mean_seconds']:.3g}s]"
        print(line)


def cmd_run(args) -> int:
    config = _load_config(args)
    result = run_experiment(config)
    if config.output_path:
        emit(result.rows, config.output_format, config.output_path)
        print(f"wrote {len(result.rows)} rows to {config.output_path}")
    _print_summary(result.summary)
    return 0


def cmd_oracle(args) -> int:
    config = _load_config(args)
    config = dataclasses.replace(config, evaluators=({"name": "empirical"},))
    result = run_experiment(config)
    if config.output_path:
        emit(result.rows, config.output_format, config.output_path)
        print(f"wrote {len(result.rows)} rows to {config.output_path}")
    for key, entry in result.summary.items():
        if "oracle_bias" in entry:
            print(
                f"{key}: empirical={entry['mean']:.6g}  true={entry['mean_oracle']:.6g}"
                f"  oracle_bias={entry['oracle_bias']:.6g} (se {entry['stderr_oracle_bias']:.2g})"
            )
    return 0


def cmd_validate(args) -> int:
    config = _load_config(args)
    print(json.dumps(dataclasses.asdict(config), indent=2, default=str))
    print("config OK")
    return 0


def cmd_list_problems(_args) -> int:
    for name in list_problems():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opteval",
        description="Bias-corrected evaluation experiments for data-driven optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("oracle", cmd_oracle), ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output", default=None, help="override the output path")
        p.add_argument("--jobs", type=int, default=None, help="parallel replication workers")
        p.set_defaults(handler=fn)
    lp = sub.add_parser("list-problems")
    lp.set_defaults(handler=cmd_list_problems)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OptevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
