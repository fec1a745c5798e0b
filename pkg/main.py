import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from loglab.cli import commands
from loglab.core.config import config, load_run_config
from loglab.core.exceptions import ConfigError, LogLabError
from loglab.core.schemas import RunConfig

logger = logging.getLogger("loglab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# flag dest -> config key
_OVERRIDE_FLAGS = {
    "dataset": "dataset",
    "format": "format",
    "delta_ms": "delta_ms",
    "max_len": "max_len",
    "seed": "seed",
    "threshold": "threshold",
    "out_dir": "out_dir",
    "limit": "limit",
    "workers": "workers",
    "failure_times": "failure_times_path",
    "failure_unit": "failure_unit",
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--dataset", help="path of the raw log file")
    parser.add_argument(
        "--format", choices=sorted(config.DATASET_PRESETS), help="dataset format"
    )
    parser.add_argument("--delta-ms", dest="delta_ms", type=int)
    parser.add_argument("--max-len", dest="max_len", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--limit", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--failure-times",
        dest="failure_times",
        help="file of failure timestamps, one per line",
    )
    parser.add_argument(
        "--failure-unit",
        dest="failure_unit",
        choices=["seconds", "milliseconds"],
    )
    parser.add_argument(
        "--set",
        dest="extra",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any configuration key",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loglab", description=config.APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=config.APP_VERSION)
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("prepare", "parse the dataset, assign weak labels, build the vocabulary"),
        ("train", "train the scorer on the prepared partition"),
        ("label", "score and label every record"),
        ("evaluate", "compare labels with ground truth"),
        ("run-all", "prepare, train, label and evaluate"),
        ("sweep-delta", "full run for every delta in delta_sweep"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "label":
            sub.add_argument("--checkpoint", help="checkpoint to restore")
        if name == "evaluate":
            sub.add_argument("--labeled", help="labeled file to evaluate")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for item in args.extra:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = value.split(",") if key == "delta_sweep" else value
    for dest, key in _OVERRIDE_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[key] = value
    return values


def _dispatch(args: argparse.Namespace) -> Callable[[RunConfig], Dict[str, Any]]:
    if args.command == "label":
        return lambda run_config: commands.cmd_label(run_config, args.checkpoint)
    if args.command == "evaluate":
        return lambda run_config: commands.cmd_evaluate(run_config, args.labeled)
    return {
        "prepare": commands.cmd_prepare,
        "train": commands.cmd_train,
        "run-all": commands.cmd_run_all,
        "sweep-delta": commands.cmd_sweep_delta,
    }[args.command]


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run_config = load_run_config(args.config, _overrides(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    try:
        summary = _dispatch(args)(run_config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (LogLabError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {e}")
        return EXIT_RUNTIME

    print(json.dumps(summary, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
