"""Run configuration: a flat key=value file whose every key is also a
command-line flag. Precedence is defaults < file < flags."""

import argparse
import dataclasses
import logging
import typing
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Union

from utils.errors import DataFormatError, InvalidArgumentError

logger = logging.getLogger(__name__)

TASKS = ("identify", "envelope")
TRAINERS = ("batch", "oselm", "sgelm", "linear")
ONLINE_TRAINERS = ("oselm", "sgelm")

# hidden units and SG-ELM step per task
TASK_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "identify": {"hidden_dim": 100, "step": 0.0008, "u1_min": 0.2, "weighted": False},
    "envelope": {"hidden_dim": 10, "step": 0.001, "u1_min": 0.35, "weighted": True},
}

# train / OSAP evaluation cycles at scale 1; identify appends a horizon window
SPLIT_DEFAULTS = {
    "identify": (11000, 5100),
    "envelope": (14300, 6200),
}


@dataclass(frozen=True)
class RunConfig:
    """
    Parameters of a gen-data / train / evaluate run.

    Fields left at None are filled in per task by `resolved()`. `step` is a
    float, or "auto" for 0.5 / max ||phi||^2 over the initialisation chunk.
    """

    task: str = "identify"
    trainer: str = "sgelm"
    hidden_dim: Optional[int] = None
    activation: str = "sigmoid"
    ridge: float = 1e-3
    step: Optional[Union[float, str]] = None
    scale_factor: float = 1.0
    weighted: Optional[bool] = None
    allow_unstable: bool = False
    init_size: int = 800
    input_lags: int = 1
    output_lags: int = 1
    horizon: int = 600
    seed: int = 0
    data_seed: int = 0
    scale: float = 1.0
    train_size: Optional[int] = None
    eval_size: Optional[int] = None
    length: Optional[int] = None
    u1_min: Optional[float] = None
    u1_max: float = 1.0
    min_hold: int = 10
    max_hold: int = 40
    noise_std: float = 0.01
    record_timing: bool = True
    data: Optional[str] = None
    checkpoint: Optional[str] = None
    report: Optional[str] = None
    predictions: Optional[str] = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise InvalidArgumentError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.trainer not in TRAINERS:
            raise InvalidArgumentError(f"trainer must be one of {TRAINERS}, got {self.trainer!r}")
        if isinstance(self.step, str) and self.step != "auto":
            raise InvalidArgumentError(f"step must be a number or 'auto', got {self.step!r}")
        if not self.scale > 0:
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def resolved(self) -> "RunConfig":
        """Copy with every task dependent default filled in."""
        changes = {
            key: value
            for key, value in TASK_DEFAULTS[self.task].items()
            if getattr(self, key) is None
        }
        train, evaluate = SPLIT_DEFAULTS[self.task]
        if self.train_size is None:
            changes["train_size"] = max(1, int(round(train * self.scale)))
        if self.eval_size is None:
            changes["eval_size"] = max(1, int(round(evaluate * self.scale)))
        config = self.replace(**changes)
        if config.length is None:
            extra = config.horizon if config.task == "identify" else 0
            config = config.replace(length=config.train_size + config.eval_size + extra)
        return config

    @property
    def is_online(self) -> bool:
        return self.trainer in ONLINE_TRAINERS


_FIELDS = typing.get_type_hints(RunConfig)

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _cast(key: str, raw: str) -> Any:
    """Converts a textual value to the type of the RunConfig field `key`."""
    if key not in _FIELDS:
        raise InvalidArgumentError(f"unknown configuration key {key!r}")
    raw = raw.strip()
    kinds = typing.get_args(_FIELDS[key]) or (_FIELDS[key],)
    if type(None) in kinds and raw.lower() in ("", "none"):
        return None
    try:
        if key == "step":
            return "auto" if raw == "auto" else float(raw)
        if bool in kinds:
            return _BOOL_WORDS[raw.lower()]
        if int in kinds:
            return int(raw)
        if float in kinds:
            return float(raw)
    except (KeyError, ValueError) as exc:
        raise InvalidArgumentError(f"bad value {raw!r} for {key}") from exc
    return raw


def parse_config(text: str) -> Dict[str, Any]:
    """
    Reads key=value lines; blank lines and lines starting with # are ignored.

    Raises:
        DataFormatError: On a line without '='.
        InvalidArgumentError: On an unknown key or a value of the wrong type.
    """
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise DataFormatError(f"expected key=value, got {line!r}", line=number)
        values[key.strip()] = _cast(key.strip(), raw)
    return values


def load_config(path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                values.update(parse_config(handle.read()))
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
        logger.debug(f"loaded {len(values)} keys from {path}")
    values.update(overrides or {})
    return RunConfig(**values)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Adds a --<key> flag per RunConfig field; unset flags stay absent."""
    parser.add_argument("--config", default=None, help="key=value run configuration file")
    for name in _FIELDS:
        parser.add_argument(f"--{name}", default=argparse.SUPPRESS, metavar="VALUE")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        name: _cast(name, str(getattr(args, name))) for name in _FIELDS if hasattr(args, name)
    }
    return load_config(getattr(args, "config", None), overrides)
