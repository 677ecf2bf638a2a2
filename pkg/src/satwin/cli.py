"""Command line interface: run / compare / validate.

Exit codes: 0 success, 2 configuration error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, ProtocolViolation
from .kernel import SimError
from .metrics import write_csv
from .runner import compare, run
from .scenario import MODE_NAMES, load_scenario


def _mode(value: str) -> str:
    if value not in MODE_NAMES:
        raise argparse.ArgumentTypeError(
            f"unknown mode {value!r}; valid modes: {', '.join(sorted(MODE_NAMES))}"
        )
    return MODE_NAMES[value]


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satwin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario in one mode")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--mode", type=_mode, default=None,
                       help="baseline | proactive | reset-cwnd (default: scenario)")
    p_run.add_argument("--seed", type=_seed, default=None)
    p_run.add_argument("--metrics", default=None, help="metrics CSV output path")
    p_run.add_argument("--trace", default=None, help="trace output path")

    p_cmp = sub.add_parser("compare", help="run several modes side by side")
    p_cmp.add_argument("--scenario", required=True)
    p_cmp.add_argument("--modes", required=True,
                       help="comma-separated list, e.g. baseline,proactive")
    p_cmp.add_argument("--seed", type=_seed, default=0)
    p_cmp.add_argument("--out", default=None, help="comparison CSV output path")

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("--scenario", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            load_scenario(args.scenario)
            print(f"{args.scenario}: ok")
            return 0
        scenario = load_scenario(args.scenario)
        if args.command == "run":
            metrics, trace = run(scenario, mode=args.mode, seed=args.seed,
                                 trace=args.trace is not None)
            csv_text = write_csv(metrics.csv_rows())
            if args.metrics:
                Path(args.metrics).write_text(csv_text)
            else:
                sys.stdout.write(csv_text)
            if args.trace:
                Path(args.trace).write_text(trace.text())
            return 0
        if args.command == "compare":
            modes = [_mode(m.strip()) for m in args.modes.split(",") if m.strip()]
            rows = compare(scenario, modes, seed=args.seed)
            csv_text = write_csv(rows)
            if args.out:
                Path(args.out).write_text(csv_text)
            else:
                sys.stdout.write(csv_text)
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimError, ProtocolViolation, AssertionError) as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
