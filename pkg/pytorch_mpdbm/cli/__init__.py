"""`mpdbm` command line: train, eval, oracle-check and inspect.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or numerical failure, 3 verification failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, NoReturn, Optional

import torch

from pytorch_mpdbm.base.exception import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    CountMismatchError,
    DimensionMismatchError,
    EnumerationBoundError,
    NonFiniteGradientError,
    NonFiniteLossError,
    NoValidMaskError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from pytorch_mpdbm.cli.commands import cmd_eval, cmd_inspect, cmd_oracle_check, cmd_train
from pytorch_mpdbm.cli.config import RunConfig, load_config

logger = logging.getLogger(__name__)

EXIT_OK: int = 0
EXIT_CONFIG: int = 1
EXIT_RUNTIME: int = 2
EXIT_VERIFICATION: int = 3

THREADS_ENV: str = 'MPDBM_THREADS'

RUNTIME_ERRORS = (
    BadMagicError,
    ChecksumError,
    CountMismatchError,
    DimensionMismatchError,
    NonFiniteGradientError,
    NonFiniteLossError,
    NoValidMaskError,
    TruncatedFileError,
    UnsupportedVersionError,
    OSError,
)


class ArgumentParser(argparse.ArgumentParser):
    r"""Reports usage errors as `ConfigError` so that they map to the configuration exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise ConfigError('<args>', message)


def build_parser() -> ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='JSON run configuration')
    common.add_argument('--seed', type=int, default=None, help='override the configured seed')
    common.add_argument('--out', type=str, default=None, help='override the output directory')
    common.add_argument('--verbose', action='store_true', help='log progress')

    parser = ArgumentParser(prog='mpdbm', description='Multi-prediction deep Boltzmann machines')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    train = subparsers.add_parser('train', parents=[common], help='train a model')
    train.add_argument('--resume', type=str, default=None, help='checkpoint directory to continue from')

    evaluate = subparsers.add_parser('eval', parents=[common], help='evaluate a checkpoint')
    evaluate.add_argument('checkpoint', type=str)

    subparsers.add_parser('oracle-check', parents=[common], help='run the verification suite on tiny models')

    inspect = subparsers.add_parser('inspect', parents=[common], help='print a checkpoint summary')
    inspect.add_argument('checkpoint', type=str)

    return parser


def _set_threads() -> None:
    value: Optional[str] = os.environ.get(THREADS_ENV)
    if value is None:
        return
    if not value.isdigit() or int(value) < 1:
        raise ConfigError(THREADS_ENV, f'must be a positive integer, got {value!r}')
    torch.set_num_threads(int(value))


def _run(args: argparse.Namespace) -> int:
    _set_threads()

    config: RunConfig = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out=args.out)

    if args.command == 'train':
        path = cmd_train(config, resume=args.resume, verbose=args.verbose)
        print(path)
    elif args.command == 'eval':
        for row in cmd_eval(config, args.checkpoint):
            print(json.dumps(row))
    elif args.command == 'oracle-check':
        passed, results = cmd_oracle_check(config)
        for r in results:
            print(json.dumps(r.to_dict()))
        if not passed:
            return EXIT_VERIFICATION
    else:
        print(json.dumps(cmd_inspect(args.checkpoint), indent=2))

    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as ex:
        print(f'error: {ex}', file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    try:
        return _run(args)
    except (ConfigError, EnumerationBoundError) as ex:
        print(f'error: {ex}', file=sys.stderr)
        return EXIT_CONFIG
    except RUNTIME_ERRORS as ex:
        print(f'error: {ex}', file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as ex:
        print(f'error: {ex}', file=sys.stderr)
        return EXIT_RUNTIME
