"""NARX regressors and the two prediction architectures.

A regressor for target index k is

    x = [u(k-1), ..., u(k-n_u), y(k-1), ..., y(k-n_y)]

with all input lags first, each group newest first. One-step-ahead
prediction (OSAP) fills it with measured outputs; multi-step-ahead
prediction (MSAP) feeds the model's own predictions back in.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple, Union

import numpy as np

from utils.elm_core import Dataset, ElmModel, predict_regression
from utils.errors import InvalidArgumentError, ShapeError
from utils.validation import as_matrix, require_positive_int

logger = logging.getLogger(__name__)

Predictor = Union[ElmModel, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class NarxConfig:
    input_lags: int = 1
    output_lags: int = 1
    input_dim: int = 1
    output_dim: int = 1

    def __post_init__(self) -> None:
        for name in ("input_lags", "output_lags", "input_dim", "output_dim"):
            require_positive_int(getattr(self, name), name)

    @property
    def regressor_dim(self) -> int:
        return self.input_dim * self.input_lags + self.output_dim * self.output_lags

    @property
    def max_lag(self) -> int:
        return max(self.input_lags, self.output_lags)


@dataclass(frozen=True, eq=False)
class SampleStream:
    """
    Ordered (x, y, label) samples. `indices` holds the cycle index of each
    target, strictly increasing.
    """

    indices: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.indices) <= 0):
            raise InvalidArgumentError("sample indices must be strictly increasing")
        if not (len(self.indices) == self.inputs.shape[0] == self.targets.shape[0]):
            raise ShapeError("indices, inputs and targets must have the same length")

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[Tuple[int, np.ndarray, np.ndarray, Optional[int]]]:
        for i, k in enumerate(self.indices):
            label = None if self.labels is None else int(self.labels[i])
            yield int(k), self.inputs[i], self.targets[i], label

    def to_dataset(self, label_targets: bool = False) -> Dataset:
        """
        Converts to a Dataset. With label_targets the +1/-1 labels become the
        regression targets, as in the envelope classification task.
        """
        if label_targets:
            if self.labels is None:
                raise InvalidArgumentError("stream carries no labels")
            return Dataset(self.inputs, self.labels.astype(np.float64)[:, None], self.labels)
        return Dataset(self.inputs, self.targets, self.labels)


def _regressor(u_history: np.ndarray, y_history: np.ndarray, config: NarxConfig) -> np.ndarray:
    # histories end at the newest row; reversed slices give newest-first lags
    u_part = u_history[::-1][: config.input_lags].reshape(-1)
    y_part = y_history[::-1][: config.output_lags].reshape(-1)
    return np.concatenate([u_part, y_part])


def build_regressors(
    u_series,
    y_series,
    config: NarxConfig,
    labels: Optional[np.ndarray] = None,
) -> SampleStream:
    """
    Unrolls input/output series into NARX samples.

    Args:
        u_series: Inputs, shape (T, u_d).
        y_series: Outputs, shape (T, y_d).
        config: Lag orders and channel dimensions.
        labels: Optional per-cycle labels of length T; sample k keeps labels[k].

    Returns:
        T - max(n_u, n_y) samples, the one for index k targeting y(k).
    """
    u = as_matrix(u_series, columns=config.input_dim, name="u_series")
    y = as_matrix(y_series, columns=config.output_dim, name="y_series")
    if u.shape[0] != y.shape[0]:
        raise ShapeError(f"u_series has {u.shape[0]} rows but y_series has {y.shape[0]}")
    length = u.shape[0]
    start = config.max_lag
    if length <= start:
        raise InvalidArgumentError(
            f"series of length {length} is too short for lags ({config.input_lags}, "
            f"{config.output_lags})"
        )

    columns = [u[start - lag : length - lag] for lag in range(1, config.input_lags + 1)]
    columns += [y[start - lag : length - lag] for lag in range(1, config.output_lags + 1)]
    inputs = np.hstack(columns)

    kept_labels = None
    if labels is not None:
        labels = np.asarray(labels).reshape(-1)
        if labels.shape[0] != length:
            raise ShapeError(f"{labels.shape[0]} labels for a series of length {length}")
        kept_labels = labels[start:].astype(np.int64)

    return SampleStream(
        indices=np.arange(start, length),
        inputs=inputs,
        targets=y[start:].copy(),
        labels=kept_labels,
    )


def _predict(model: Predictor, x: np.ndarray) -> np.ndarray:
    if isinstance(model, ElmModel):
        return predict_regression(model, x)
    return np.asarray(model(x), dtype=np.float64).reshape(-1)


def osap_predict(model: Predictor, u_history, y_history, config: NarxConfig) -> np.ndarray:
    """
    One-step-ahead prediction of y(k+1) from measured histories ending at k.

    Args:
        model: ElmModel or any callable mapping a regressor to an output vector.
        u_history: Inputs up to u(k), at least n_u rows.
        y_history: Measured outputs up to y(k), at least n_y rows.
        config: Lag orders and channel dimensions.
    """
    u = as_matrix(u_history, columns=config.input_dim, name="u_history")
    y = as_matrix(y_history, columns=config.output_dim, name="y_history")
    if u.shape[0] < config.input_lags or y.shape[0] < config.output_lags:
        raise InvalidArgumentError(
            f"histories of length ({u.shape[0]}, {y.shape[0]}) are shorter than the lags "
            f"({config.input_lags}, {config.output_lags})"
        )
    return _predict(model, _regressor(u, y, config))


def msap_predict(
    model: Predictor,
    u_sequence,
    y_seed_history,
    horizon: int,
    config: NarxConfig,
) -> np.ndarray:
    """
    Multi-step-ahead prediction in the parallel architecture.

    u_sequence and y_seed_history share their time origin: with the seed
    ending at y(k), u_sequence must reach u(k + horizon - 1). Measured outputs
    only seed the recursion; every later regressor uses predicted outputs.

    Returns:
        Predictions for y(k+1), ..., y(k+horizon), shape (horizon, y_d).
    """
    horizon = require_positive_int(horizon, "horizon")
    u = as_matrix(u_sequence, columns=config.input_dim, name="u_sequence")
    seed = as_matrix(y_seed_history, columns=config.output_dim, name="y_seed_history")
    k = seed.shape[0] - 1
    if seed.shape[0] < config.output_lags or seed.shape[0] < config.input_lags:
        raise InvalidArgumentError(
            f"seed history of length {seed.shape[0]} is shorter than the lags"
        )
    if u.shape[0] < k + horizon:
        raise InvalidArgumentError(
            f"u_sequence covers {u.shape[0]} cycles, horizon {horizon} needs {k + horizon}"
        )

    y_history = seed[-config.output_lags :].copy()
    predictions = np.empty((horizon, config.output_dim))
    for step in range(horizon):
        x = _regressor(u[: k + step + 1], y_history, config)
        y_hat = _predict(model, x)
        predictions[step] = y_hat
        y_history = np.vstack([y_history[1:], y_hat])
    return predictions
