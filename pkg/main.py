"""Entry point for the horoboundary CLI.

Run with:
    python main.py atoms --source tiling:4,5 --level 1
    python main.py verify --source free:2 --depth 5

The script configures structured logging, merges flags with the optional
``key = value`` config file, runs one pipeline command, prints its report,
and exits with the code of the error class on failure.
"""

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from horoboundary.config import load_run_config
from horoboundary.errors import HoroboundaryError, InputFormatError
from horoboundary.pipeline import COMMANDS, run_pipeline

logger: logging.Logger = logging.getLogger(__name__)

_CONFIG_FLAGS: tuple[str, ...] = (
    "source",
    "radius",
    "tree_depth",
    "horizon",
    "delta",
    "delta_radius",
    "cone_depth",
    "equivalence_depth",
    "transducer_depth",
    "faithfulness_radius",
    "state_bound",
    "horizon_audit",
    "seed",
    "output_dir",
)


# Attributes every LogRecord carries; anything else came in through ``extra``.
_RECORD_FIELDS = frozenset(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class _JsonFormatter(logging.Formatter):
    """One JSON object per record.

    Records on the ``audit`` logger already carry a JSON document as their
    message; it is embedded as the ``audit`` object instead of a string.
    """

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, object] = {
            "timestamp": datetime.datetime.fromtimestamp(record.created, datetime.timezone.utc).isoformat(
                timespec="milliseconds"
            ),
            "level": record.levelname,
            "logger": record.name,
        }
        message = record.getMessage()
        if record.name == "audit":
            try:
                payload["audit"] = json.loads(message)
            except json.JSONDecodeError:
                payload["message"] = message
        else:
            payload["message"] = message
        payload.update(
            (key, value) for key, value in vars(record).items() if key not in _RECORD_FIELDS
        )
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def _configure_logging() -> None:
    """Configure logging format based on the LOG_FORMAT environment variable.

    Set LOG_FORMAT=json for one JSON object per line.  Any other value (or
    absent) falls back to human-readable plaintext.  Logs go to stderr.
    """
    log_format = os.environ.get("LOG_FORMAT", "text").lower()

    if log_format == "json":
        handler = logging.StreamHandler()
        handler.setFormatter(_JsonFormatter())
        logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)
    else:
        logging.basicConfig(
            level=logging.INFO,
            format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="horoboundary",
        description="Trees of atoms, type graphs and boundary transducers of hyperbolic graphs.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--source", help="tiling:p,q | free:k | line | <edge file>")
    parser.add_argument("--radius", type=int)
    parser.add_argument("--depth", dest="tree_depth", type=int, help="tree depth N")
    parser.add_argument("--horizon", type=int, help="horizon H")
    parser.add_argument("--delta", type=int)
    parser.add_argument("--delta-radius", type=int, help="radius of the delta estimate")
    parser.add_argument("--cone-depth", type=int)
    parser.add_argument("--equivalence-depth", type=int)
    parser.add_argument("--transducer-depth", type=int)
    parser.add_argument("--faithfulness-radius", type=int, help="ball for group relations")
    parser.add_argument("--state-bound", type=int)
    parser.add_argument(
        "--horizon-audit", action=argparse.BooleanOptionalAction, help="check horizon H + 1"
    )
    parser.add_argument("--seed", type=int, help="seed for sampled checks")
    parser.add_argument("--output-dir", type=Path)
    parser.add_argument("--level", type=int, default=1, help="atoms: partition level")
    parser.add_argument("--dump", action="store_true", help="atoms: write member lists")
    parser.add_argument("--format", dest="fmt", choices=("text", "dot"), default="text")
    parser.add_argument("--element", help="group word, e.g. 'r s r^-1'")
    parser.add_argument("--address-depth", type=int, help="encode: chain length")
    return parser


def run(argv: list[str] | None = None) -> None:
    """Parse flags, run one command, and exit with its status.

    Exit codes: 0 success, 2 input or configuration error, 3 insufficient
    radius, 4 synthesis divergence, 5 audit failure, 1 anything else raised
    by the library.
    """
    _configure_logging()
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in _CONFIG_FLAGS}

    try:
        cfg = load_run_config(args.config, overrides)
    except ValidationError as exc:
        print(f"Error: invalid configuration: {exc}", file=sys.stderr)
        sys.exit(InputFormatError.exit_code)
    except (HoroboundaryError, OSError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        sys.exit(InputFormatError.exit_code)

    try:
        result = run_pipeline(
            args.command,
            cfg,
            level=args.level,
            dump=args.dump,
            fmt=args.fmt,
            element=args.element,
            address_depth=args.address_depth,
        )
    except HoroboundaryError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        sys.exit(exc.exit_code)

    print(result.report)
    for check in result.checks:
        print(check)


if __name__ == "__main__":
    run()
