"""
gradcheck command: analytic against numeric gradients
"""
import argparse
import logging
from typing import Any, Dict

from errors import UsageError
from utils.gradcheck import TOLERANCE, run_gradcheck

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="check backward against central differences")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--samples", type=int, default=6, help="checked entries per model tensor")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    if args.seeds < 1 or args.samples < 1:
        raise UsageError("--seeds and --samples must be positive")
    worst = run_gradcheck(args.seeds, args.samples)
    max_error = max(worst.values())
    if max_error >= TOLERANCE:
        failing = sorted(name for name, err in worst.items() if err >= TOLERANCE)
        logger.error(f"Gradient check failed for {', '.join(failing)}")
    return {
        "command": "gradcheck",
        "seeds": args.seeds,
        "max_relative_error": max_error,
        "checks": worst,
        "passed": max_error < TOLERANCE,
    }
