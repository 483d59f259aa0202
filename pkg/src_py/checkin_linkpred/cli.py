"""Command-line entry point. Summaries go to stdout as a single JSON
object; logs go to stderr.

Exit codes: 0 on success (including benchmark runs where individual
grid cells failed), 1 when the pipeline itself fails, 2 for invalid
configuration or arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable
from collections.abc import Sequence
from typing import Any

from checkin_linkpred.bench import cmd_bench
from checkin_linkpred.bench import cmd_filter
from checkin_linkpred.bench import cmd_residual_curve
from checkin_linkpred.bench import cmd_sample
from checkin_linkpred.bench import cmd_stats
from checkin_linkpred.checkins import DEFAULT_SCHEMA
from checkin_linkpred.config import RunConfig
from checkin_linkpred.config import load_config
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import LinkpredException
from checkin_linkpred.predictors import Method

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2

_COMMANDS: dict[str, Callable[[RunConfig], dict[str, Any]]] = {
    'stats': cmd_stats,
    'bench': cmd_bench,
    'residual-curve': cmd_residual_curve,
    'sample': cmd_sample,
    'filter': cmd_filter,
}
_SCHEMA_HELP = (
    'Check-in files are tab-separated. The default column layout is '
    + f'user={DEFAULT_SCHEMA.user}, venue={DEFAULT_SCHEMA.venue}, '
    + f'category={DEFAULT_SCHEMA.category}, '
    + f'latitude={DEFAULT_SCHEMA.latitude}, '
    + f'longitude={DEFAULT_SCHEMA.longitude}, '
    + f'timestamp={DEFAULT_SCHEMA.timestamp} '
    + f'({DEFAULT_SCHEMA.width} columns); override it with a '
    + '[dataset.schema] table in the config file.')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='checkin-linkpred',
        description='Link prediction benchmarks on check-in networks.',
        epilog=_SCHEMA_HELP)
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config', help='TOML run config. Flags override its values.')
    common.add_argument('--dataset', help='Check-in TSV file.')
    common.add_argument('--out', help='Output directory.')
    common.add_argument(
        '--seed', type=int, action='append', dest='seeds',
        help='Sampling seed (repeatable).')
    common.add_argument(
        '--workers', type=int, help='Evaluation threads.')
    common.add_argument(
        '--method', action='append', dest='methods',
        choices=[str(method) for method in Method],
        help='Predictor with default parameters (repeatable).')
    common.add_argument(
        '--fraction', type=float, action='append', dest='fractions',
        help='Random-batch sample fraction (repeatable).')
    common.add_argument(
        '--window', action='append', dest='windows',
        help='Time-incremental sample window START:END (repeatable).')
    common.add_argument(
        '--log-level', default='INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    for name, command in _COMMANDS.items():
        subparsers.add_parser(
            name,
            parents=[common],
            help=(command.__doc__ or '').strip().splitlines()[0],
            epilog=_SCHEMA_HELP)

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig() if args.config is None else load_config(args.config)
    return config.with_overrides(
        dataset_path=args.dataset,
        output_dir=args.out,
        seeds=None if args.seeds is None else tuple(args.seeds),
        workers=args.workers,
        methods=None if args.methods is None else tuple(args.methods),
        fractions=None if args.fractions is None else tuple(args.fractions),
        windows=None if args.windows is None else tuple(args.windows))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        config = resolve_config(args)
        summary = _COMMANDS[args.command](config)
    except InvalidConfig as exc:
        logger.error('Invalid configuration: %s', exc)
        return EXIT_INVALID_CONFIG
    except (LinkpredException, OSError):
        logger.exception('%s failed', args.command)
        return EXIT_FAILURE

    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write('\n')
    return EXIT_OK
