"""Command-line entry point: ``skmanifold <subcommand> [--config FILE] [--key value ...]``.

Exit codes: 0 all checks pass, 1 a check fails, 2 invalid configuration,
3 numerical failure (blow-up or non-convergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import _TYPES, ConfigError, _coerce, load_config
from .experiments import RUNNERS, _clean
from .integrators import BlowUpError
from .lyapunov_perron import LPConvergenceError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("skmanifold")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skmanifold", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file; flags override its keys")
        p.add_argument("--quiet", action="store_true")
        for key, typ in _TYPES.items():
            if key == "experiment":
                continue
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            if typ == "bool":
                p.add_argument(*flags, dest=key, nargs="?", const="true", default=None)
            else:
                p.add_argument(*flags, dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        overrides = {k: _coerce(k, v) for k, v in vars(args).items() if k in _TYPES and v is not None}
        cfg = load_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = RUNNERS[args.command](cfg)
    except (LPConvergenceError, BlowUpError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    shown = {k: v for k, v in summary.items() if k != "config"}
    log.info(json.dumps(_clean(shown), indent=2, sort_keys=True, default=str))
    return EXIT_PASS if summary.get("passed") else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
