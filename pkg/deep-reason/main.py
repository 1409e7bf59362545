"""
Deep Reason - Command Line Application
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

import settings
from commands import ablate as ablate_command
from commands import ensemble as ensemble_command
from commands import eval as eval_command
from commands import gen as gen_command
from commands import gradcheck as gradcheck_command
from commands import predict as predict_command
from commands import train as train_command
from errors import DeepReasonError, ExitCode

logger = logging.getLogger(__name__)

COMMANDS = [
    gen_command,
    train_command,
    predict_command,
    eval_command,
    ensemble_command,
    ablate_command,
    gradcheck_command,
]


def configure_logging(level: str) -> None:
    # stdout is reserved for the JSON summary
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='{"time": "%(asctime)s", "level": "%(levelname)s", "message": "%(message)s", "service": "deep-reason"}',
        datefmt='%Y-%m-%d %H:%M:%S',
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deep-reason",
        description="Visual question answering baseline over synthetic scene graphs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.OK if not e.code else ExitCode.USAGE
    args.argv = argv
    configure_logging(args.log_level)

    try:
        summary = args.handler(args)
    except DeepReasonError as e:
        logger.debug(f"{type(e).__name__} in {args.command}", exc_info=True)
        print(f"deep-reason {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        # only config files and flags get here; data file loaders raise InputError
        print(f"deep-reason {args.command}: invalid configuration: {e.errors()[0]['msg']}", file=sys.stderr)
        return ExitCode.USAGE

    print(json.dumps(summary, sort_keys=True))
    return ExitCode.OK if summary.get("passed", True) else ExitCode.CONTRACT


if __name__ == "__main__":
    sys.exit(int(main()))
