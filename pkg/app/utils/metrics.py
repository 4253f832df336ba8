"""Channel normalisation, normalised RMSE and imbalance-aware class metrics."""

import logging
import os
from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np
import pandas as pd

from utils.elm_core import MAJORITY_LABEL, MINORITY_LABEL
from utils.errors import InvalidArgumentError, OutputPathError, ShapeError
from utils.validation import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Affine map of every channel from [min, max] onto [-1, 1]."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.minimum, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.maximum, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ShapeError(f"min {lo.shape} and max {hi.shape} differ in length")
        bad = np.flatnonzero(~(hi > lo))
        if bad.size:
            raise InvalidArgumentError(f"channel {int(bad[0])} has max <= min")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def channels(self) -> int:
        return self.minimum.shape[0]

    def apply(self, data) -> np.ndarray:
        """Maps raw values to the normalised scale; out-of-range data is not clipped."""
        data = np.asarray(data, dtype=np.float64)
        if data.shape[-1] != self.channels:
            raise ShapeError(f"data has {data.shape[-1]} channels, normalizer {self.channels}")
        return 2.0 * (data - self.minimum) / (self.maximum - self.minimum) - 1.0

    def invert(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=np.float64)
        if data.shape[-1] != self.channels:
            raise ShapeError(f"data has {data.shape[-1]} channels, normalizer {self.channels}")
        return (data + 1.0) * 0.5 * (self.maximum - self.minimum) + self.minimum


def fit_normalizer(data) -> Normalizer:
    """
    Records the per-channel min and max of data.

    :param data: array-like: matrix with one channel per column
    :return: Normalizer: the fitted normalizer
    :raises InvalidArgumentError: if a channel holds a single distinct value
    """
    data = as_matrix(data, name="data")
    lo = data.min(axis=0)
    hi = data.max(axis=0)
    constant = np.flatnonzero(hi == lo)
    if constant.size:
        raise InvalidArgumentError(f"channel {int(constant[0])} is constant, cannot normalize")
    return Normalizer(lo, hi)


def normalized_rmse(y_true, y_pred, normalizer: Normalizer) -> float:
    """
    sqrt((1/n) sum_i sum_j (y~_j^i - yhat~_j^i)^2) on normalised values; the
    output channels are summed inside the mean over samples.
    """
    y_true = as_matrix(y_true, name="y_true")
    y_pred = as_matrix(y_pred, name="y_pred")
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"y_true {y_true.shape} and y_pred {y_pred.shape} differ")
    diff = normalizer.apply(y_true) - normalizer.apply(y_pred)
    return float(np.sqrt(np.sum(diff * diff) / y_true.shape[0]))


@dataclass
class ConfusionCounts:
    """Counts with +1 as the positive and -1 as the negative class."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise InvalidArgumentError("confusion counts must be nonnegative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    def update(self, y_true, y_pred) -> "ConfusionCounts":
        """Accumulates one sample or a batch of labels in place."""
        y_true = np.asarray(y_true).reshape(-1)
        y_pred = np.asarray(y_pred).reshape(-1)
        if y_true.shape != y_pred.shape:
            raise ShapeError(f"{y_true.shape[0]} labels but {y_pred.shape[0]} predictions")
        pos = y_true == MAJORITY_LABEL
        neg = y_true == MINORITY_LABEL
        if not np.all(pos | neg):
            raise InvalidArgumentError("labels must be +1 or -1")
        self.tp += int(np.sum(pos & (y_pred == MAJORITY_LABEL)))
        self.fn += int(np.sum(pos & (y_pred != MAJORITY_LABEL)))
        self.tn += int(np.sum(neg & (y_pred == MINORITY_LABEL)))
        self.fp += int(np.sum(neg & (y_pred != MINORITY_LABEL)))
        return self

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        return cls().update(y_true, y_pred)


def imbalance_metrics(counts: ConfusionCounts) -> Dict[str, float]:
    """
    TPR, TNR, their geometric mean GM and arithmetic mean TA.

    Raises:
        InvalidArgumentError: If either class has no samples.
    """
    if counts.positives == 0 or counts.negatives == 0:
        raise InvalidArgumentError(
            f"metrics undefined with N+ = {counts.positives}, N- = {counts.negatives}"
        )
    tpr = counts.tp / counts.positives
    tnr = counts.tn / counts.negatives
    return {
        "TPR": tpr,
        "TNR": tnr,
        "GM": float(np.sqrt(tpr * tnr)),
        "TA": 0.5 * (tpr + tnr),
    }


def format_report(values: Mapping[str, object]) -> str:
    """Flat key=value lines; floats with 6 significant digits."""
    lines = []
    for key, value in values.items():
        if isinstance(value, (float, np.floating)):
            value = f"{float(value):.6g}"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as exc:
        raise OutputPathError(f"cannot write report {path}: {exc}") from exc
    logger.info(f"report written to {path}")


def write_report(path: str, values: Mapping[str, object]) -> None:
    write_text(path, format_report(values))


def write_predictions(path: str, frame: pd.DataFrame) -> None:
    """Per-cycle prediction table for plotting, floats at full precision."""
    directory = os.path.dirname(path)
    if directory and not os.path.isdir(directory):
        raise OutputPathError(f"directory {directory} does not exist")
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as exc:
        raise OutputPathError(f"cannot write predictions {path}: {exc}") from exc
    logger.info(f"{len(frame)} predictions written to {path}")
