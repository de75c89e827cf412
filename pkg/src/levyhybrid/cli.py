"""Command-line interface: run scenarios, validate configs, list modes.

Exit codes: 0 all enabled assertions pass, 1 assertion failure,
2 config/schema error, 3 precondition failure (e.g. moment condition).
The only environment knob is LEVYHYBRID_WORKERS for the worker count.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, PreconditionError
from .runner import run_scenario
from .scenarios import MODES, build_scenario, load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levyhybrid",
        description="Monte Carlo stability experiments for hybrid Levy systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config", help="path to a JSON scenario config")
    run_p.add_argument("--out", default="out", help="output directory (default: ./out)")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--paths", type=int, default=None, help="override the replication count")
    run_p.add_argument("--quiet", action="store_true", help="suppress per-assertion output")

    val_p = sub.add_parser("validate", help="validate a scenario config")
    val_p.add_argument("config", help="path to a JSON scenario config")

    sub.add_parser("list-modes", help="list scenario modes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-modes":
        for mode, desc in MODES.items():
            print(f"{mode:18s} {desc}")
        return 0
    if args.command == "validate":
        try:
            build_scenario(load_config(args.config))
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        print("config OK")
        return 0
    # run
    try:
        result = run_scenario(
            args.config,
            args.out,
            seed=args.seed,
            paths=args.paths,
            quiet=args.quiet,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 3
    return result.exit_code


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
