"""Synthetic data source: A-PRBS excitation and a nonlinear two-output plant
with a misfire-like dropout regime, plus a realizable ELM stream."""

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from utils.elm_core import MAJORITY_LABEL, MINORITY_LABEL, HiddenLayer, hidden_matrix
from utils.errors import InvalidArgumentError, ShapeError
from utils.narx import SampleStream
from utils.validation import as_matrix, require_positive_int

logger = logging.getLogger(__name__)

VARIABILITY_WINDOW = 5


@dataclass(frozen=True)
class AprbsConfig:
    """
    Amplitude modulated pseudo random binary sequence.

    Attributes:
        lower, upper: Per-channel amplitude bounds.
        min_hold, max_hold: Bounds on how many cycles each level is held.
        length: Number of cycles T.
        seed: Seed of the generator.
    """

    lower: Sequence[float] = (0.2, 0.0, 0.0)
    upper: Sequence[float] = (1.0, 1.0, 1.0)
    min_hold: int = 10
    max_hold: int = 40
    length: int = 1000
    seed: int = 0

    @property
    def channels(self) -> int:
        return len(self.lower)


def generate_aprbs(config: AprbsConfig) -> np.ndarray:
    """
    Piecewise constant excitation, shape (T, channels). Every channel draws
    its own hold durations uniformly from [min_hold, max_hold] and its levels
    uniformly from [lower, upper]; the last hold may be cut by T.
    """
    lower = np.asarray(config.lower, dtype=np.float64)
    upper = np.asarray(config.upper, dtype=np.float64)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise InvalidArgumentError("lower and upper bounds must be vectors of equal length")
    if np.any(lower > upper):
        raise InvalidArgumentError(f"amplitude bounds inverted: lower={lower}, upper={upper}")
    if config.min_hold < 1 or config.max_hold < config.min_hold:
        raise InvalidArgumentError(
            f"hold bounds must satisfy 1 <= min_hold <= max_hold, got "
            f"[{config.min_hold}, {config.max_hold}]"
        )
    length = require_positive_int(config.length, "length")

    signal = np.empty((length, lower.shape[0]))
    streams = np.random.SeedSequence(config.seed).spawn(lower.shape[0])
    for channel, seq in enumerate(streams):
        rng = np.random.Generator(np.random.Philox(seq))
        t = 0
        while t < length:
            hold = int(rng.integers(config.min_hold, config.max_hold + 1))
            signal[t : t + hold, channel] = rng.uniform(lower[channel], upper[channel])
            t += hold
    return signal


def hold_lengths(signal: np.ndarray) -> np.ndarray:
    """Lengths of the constant runs of a single channel, last run included."""
    signal = np.asarray(signal).reshape(-1)
    changes = np.flatnonzero(np.diff(signal) != 0) + 1
    edges = np.concatenate([[0], changes, [signal.shape[0]]])
    return np.diff(edges)


@dataclass(frozen=True)
class PlantConfig:
    """Coefficients of the synthetic plant; the defaults are normative."""

    a1: float = 0.6
    a2: float = 0.5
    b1: float = 0.9
    b2: float = 0.8
    c1: float = 3.0
    c2: float = 2.0
    misfire_threshold: float = -0.2
    variability_threshold: float = 0.35
    noise_std: float = 0.01

    def __post_init__(self) -> None:
        if not self.noise_std >= 0:
            raise InvalidArgumentError(f"noise_std must be nonnegative, got {self.noise_std}")


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    u_series: np.ndarray
    y_series: np.ndarray
    labels: np.ndarray
    cycles: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.cycles is None:
            object.__setattr__(self, "cycles", np.arange(self.u_series.shape[0]))
        if not (self.u_series.shape[0] == self.y_series.shape[0] == self.labels.shape[0]):
            raise ShapeError("u_series, y_series and labels must have the same length")

    def __len__(self) -> int:
        return self.u_series.shape[0]

    def slice(self, start: int, stop: int) -> "LabeledSeries":
        return LabeledSeries(
            self.u_series[start:stop],
            self.y_series[start:stop],
            self.labels[start:stop],
            self.cycles[start:stop],
        )

    @property
    def minority_fraction(self) -> float:
        return float(np.mean(self.labels == MINORITY_LABEL)) if len(self) else 0.0


def label_instability(y_series: np.ndarray, config: PlantConfig) -> np.ndarray:
    """
    -1 where y1 is below the misfire threshold or the trailing
    VARIABILITY_WINDOW-cycle standard deviation of y2 exceeds the variability
    threshold, +1 elsewhere.
    """
    y_series = as_matrix(y_series, columns=2, name="y_series")
    rolling_std = (
        pd.Series(y_series[:, 1])
        .rolling(VARIABILITY_WINDOW, min_periods=1)
        .std(ddof=0)
        .to_numpy()
    )
    unstable = (y_series[:, 0] < config.misfire_threshold) | (
        rolling_std > config.variability_threshold
    )
    return np.where(unstable, MINORITY_LABEL, MAJORITY_LABEL).astype(np.int64)


def simulate_plant(config: PlantConfig, u_series, seed: int = 0) -> LabeledSeries:
    """
    Runs the plant from a zero initial state:

        y1(k) = a1 y1(k-1) + b1 tanh(c1 u1(k-1) - c2 u2(k-1)) + s(k-1) + w1(k)
        y2(k) = a2 y2(k-1) + b2 (u3(k-1) - 0.5) - 0.8 s(k-1) + w2(k)

    where s(k) = -1.2 while u1(k) < 0.25 and y1(k) < 0.1 (dropout) and w is
    Gaussian measurement noise of std noise_std.

    Args:
        config: Plant coefficients and thresholds.
        u_series: Inputs of shape (T, 3).
        seed: Seed of the noise generator.
    """
    u = as_matrix(u_series, columns=3, name="u_series")
    length = u.shape[0]
    rng = np.random.Generator(np.random.Philox(seed))
    noise = rng.normal(0.0, 1.0, size=(length, 2)) * config.noise_std

    y = np.zeros((length, 2))
    for k in range(1, length):
        u1, u2, u3 = u[k - 1]
        dropout = -1.2 if (u1 < 0.25 and y[k - 1, 0] < 0.1) else 0.0
        y[k, 0] = (
            config.a1 * y[k - 1, 0]
            + config.b1 * np.tanh(config.c1 * u1 - config.c2 * u2)
            + dropout
            + noise[k, 0]
        )
        y[k, 1] = config.a2 * y[k - 1, 1] + config.b2 * (u3 - 0.5) - 0.8 * dropout + noise[k, 1]

    labels = label_instability(y, config)
    series = LabeledSeries(u, y, labels)
    logger.debug(f"simulated {length} cycles, minority fraction {series.minority_fraction:.4f}")
    return series


def realizable_stream(
    layer: HiddenLayer,
    w_star,
    input_distribution: Literal["uniform", "gaussian"] = "uniform",
    length: int = 1000,
    seed: int = 0,
) -> SampleStream:
    """
    Realizable stream y_i = W_*^T phi(x_i) with x_i i.i.d. uniform on
    [-1, 1]^n or standard normal, noise free.
    """
    w_star = np.asarray(w_star, dtype=np.float64)
    if w_star.ndim == 1:
        w_star = w_star.reshape(-1, 1)
    if w_star.shape[0] != layer.hidden_dim:
        raise ShapeError(f"W_star {w_star.shape} does not match hidden_dim {layer.hidden_dim}")
    length = require_positive_int(length, "length")

    rng = np.random.Generator(np.random.Philox(seed))
    size = (length, layer.input_dim)
    if input_distribution == "uniform":
        inputs = rng.uniform(-1.0, 1.0, size=size)
    elif input_distribution == "gaussian":
        inputs = rng.normal(0.0, 1.0, size=size)
    else:
        raise InvalidArgumentError(f"unknown input distribution {input_distribution!r}")
    targets = hidden_matrix(layer, inputs) @ w_star
    return SampleStream(indices=np.arange(length), inputs=inputs, targets=targets)

