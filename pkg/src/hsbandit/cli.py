"""Command-line entry point.

Subcommands cover the synthetic replication protocol, logged-stream replay,
the bandit classification harness, a reduced-scale self-check battery, and a
structure dump. Every subcommand reads an optional JSON config plus
``--set key=value`` overrides; a few common fields also have direct flags.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import HsbError
from .experiments import (
    ALGORITHMS,
    ExperimentConfig,
    _apply_override,
    dump_structure,
    run_ecoc,
    run_replay,
    run_synthetic,
    verify,
)

_FLAG_TO_KEY = {
    "algorithm": "algorithm",
    "arms": "arms",
    "eta": "eta",
    "regions": "regions",
    "depth": "structure.depth",
    "cells": "structure.cells",
    "dims": "structure.dims",
    "horizon": "env.horizon",
    "model": "env.model",
    "datasets": "datasets",
    "presentations": "presentations",
    "jobs": "jobs",
    "output_dir": "output_dir",
    "log": "replay.log",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="dotted-path config override, e.g. --set env.horizon=5000",
    )
    parser.add_argument("--algorithm", choices=ALGORITHMS)
    parser.add_argument("--arms", type=int)
    parser.add_argument("--eta", help="learning rate, a number or 'auto'")
    parser.add_argument("--regions", type=int,
                        help="region count the auto learning rate targets")
    parser.add_argument("--depth", type=int)
    parser.add_argument("--cells", type=int)
    parser.add_argument("--dims", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--model", choices=["stationary", "switched"])
    parser.add_argument("--datasets", type=int)
    parser.add_argument("--presentations", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--log", help="logged-stream CSV (run-replay)")


def _collect_overrides(args: argparse.Namespace) -> list[str]:
    overrides = list(args.set)
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        overrides.append(f"{key}={json.dumps(value)}"
                         if not isinstance(value, str) else f"{key}={value}")
    return overrides


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = _collect_overrides(args)
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    raw: dict = {}
    for item in overrides:
        raw = _apply_override(raw, item)
    return ExperimentConfig.from_dict(raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsbandit",
        description="Hierarchical structure bandits over quantized contexts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-synthetic",
                       help="replicated runs on the synthetic loss model")
    _add_common(p)

    p = sub.add_parser("run-replay",
                       help="offline evaluation against a logged stream")
    _add_common(p)

    p = sub.add_parser("run-ecoc",
                       help="bandit multiclass harness over codeword contexts")
    _add_common(p)

    p = sub.add_parser("verify",
                       help="reduced-scale identity and bound self-checks")
    p.add_argument("--json", action="store_true",
                   help="emit the full JSON result instead of one line each")

    p = sub.add_parser("dump-structure",
                       help="print a splitting structure as JSON")
    _add_common(p)
    p.add_argument("--out", help="write JSON here instead of stdout")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (HsbError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "verify":
        result = verify()
        if args.json:
            print(json.dumps(result, indent=2, sort_keys=True))
        else:
            for check in result["checks"]:
                status = "PASS" if check["ok"] else "FAIL"
                print(f"{status} {check['name']}")
        return 0 if result["ok"] else 1

    config = _load_config(args)

    if args.command == "run-synthetic":
        summary = run_synthetic(config)
        report = summary["report"]
        print(f"algorithm {report['algorithm']}: {report['runs']} runs "
              f"of {report['horizon']} rounds")
        print(f"mean loss {report['mean_algorithm_loss']:.3f}, "
              f"best mapping {report['mean_best_mapping_loss']:.3f}, "
              f"regret {report['mean_regret']:.3f}")
        if report["bound"] is not None:
            verdict = "holds" if report["bound_ok"] else "EXCEEDED"
            print(f"regret bound {report['bound']:.3f} ({verdict}, "
                  f"eta {report['eta']:.6f})")
        print(f"outputs in {config.output_dir}/")
        return 0

    if args.command == "run-replay":
        summary = run_replay(config)
        print(f"replayed {summary['log_rounds']} logged rounds, "
              f"{len(summary['runs'])} seed(s)")
        for row in summary["runs"]:
            rate = row["click_rate"]
            rate_text = "n/a" if rate is None else f"{rate:.4f}"
            print(f"seed {row['algorithm_seed']}: matched {row['matched']}, "
                  f"click rate {rate_text}")
        if summary["mean_click_rate"] is not None:
            print(f"mean click rate {summary['mean_click_rate']:.4f}")
        print(f"outputs in {config.output_dir}/")
        return 0

    if args.command == "run-ecoc":
        summary = run_ecoc(config)
        rates = [e / summary["epoch_size"]
                 for e in summary["errors_per_epoch"]]
        print(f"{summary['samples']} samples over "
              f"{len(rates)} epochs of {summary['epoch_size']}")
        for i, rate in enumerate(rates, start=1):
            print(f"epoch {i}: error rate {rate:.4f}")
        print(f"total error rate {summary['total_error_rate']:.4f}")
        print(f"outputs in {config.output_dir}/")
        return 0

    if args.command == "dump-structure":
        payload = dump_structure(config)
        text = json.dumps(payload, indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
            print(f"wrote {len(payload['nodes'])} nodes to {args.out}")
        else:
            print(text)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
