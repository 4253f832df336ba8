"""Command line entry point.

    python app/cli.py gen-data --task identify --data run/plant.csv
    python app/cli.py train    --data run/plant.csv --trainer sgelm --checkpoint run/sg.ckpt
    python app/cli.py evaluate --data run/plant.csv --checkpoint run/sg.ckpt --predictions run/p.csv
    python app/cli.py compare  --data run/plant.csv

Every run configuration key may come from a key=value file (--config) and
be overridden by a same-named flag. Failures print `error: <message>` to
stderr and exit with 1 (bad arguments), 2 (unwritable output), 3 (unstable
step), 4 (malformed data) or 5 (dimension mismatch).
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from utils.config import RunConfig, add_config_arguments, config_from_args
from utils.datafile import read_data, write_data
from utils.errors import ElmStreamError, InvalidArgumentError
from utils.instructor import Instructor, compare, evaluate, format_table, generate_series
from utils.metrics import format_report, write_predictions, write_report, write_text
from utils.serialization import load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


def _require(config: RunConfig, *keys: str) -> None:
    missing = [key for key in keys if getattr(config, key) is None]
    if missing:
        raise InvalidArgumentError("missing " + ", ".join(f"--{key}" for key in missing))


def _emit(config: RunConfig, values: Dict[str, object]) -> None:
    print(format_report(values), end="")
    if config.report is not None:
        write_report(config.report, values)


def cmd_gen_data(config: RunConfig) -> int:
    _require(config, "data")
    config = config.resolved()
    series = generate_series(config)
    write_data(config.data, series)
    _emit(
        config,
        {
            "rows": len(series),
            "minority_fraction": series.minority_fraction,
            "u1_min": config.u1_min,
            "u1_max": config.u1_max,
            "min_hold": config.min_hold,
            "max_hold": config.max_hold,
            "data_seed": config.data_seed,
        },
    )
    return 0


def cmd_train(config: RunConfig) -> int:
    _require(config, "data", "checkpoint")
    series = read_data(config.data)
    instructor = Instructor(config, series)
    values = instructor.train()
    save_checkpoint(config.checkpoint, instructor.checkpoint())
    _emit(config, values)
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    _require(config, "data", "checkpoint")
    checkpoint = load_checkpoint(config.checkpoint)
    series = read_data(config.data)
    # the checkpoint decides task, lags and the training rows, the config the horizon
    config = config.replace(
        task=checkpoint.task,
        input_lags=checkpoint.narx.input_lags,
        output_lags=checkpoint.narx.output_lags,
    )
    values, frame = evaluate(checkpoint, series, config)
    if config.predictions is not None:
        write_predictions(config.predictions, frame)
    _emit(config, values)
    return 0


def cmd_compare(config: RunConfig) -> int:
    config = config.resolved()
    series = read_data(config.data) if config.data is not None else generate_series(config)
    table = format_table(compare(config, series))
    print(table, end="")
    if config.report is not None:
        write_text(config.report, table)
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log_level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity on stderr",
    )
    add_config_arguments(common)

    parser = argparse.ArgumentParser(description="Streaming ELM training on a synthetic plant")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="Generate a labelled plant data CSV")
    sub.add_parser("train", parents=[common], help="Train a model and write a checkpoint")
    sub.add_parser("evaluate", parents=[common], help="Evaluate a checkpoint on held-out data")
    sub.add_parser("compare", parents=[common], help="Train and evaluate every trainer")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        return COMMANDS[args.command](config)
    except ElmStreamError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
