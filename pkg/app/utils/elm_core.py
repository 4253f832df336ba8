"""Extreme learning machine hypothesis class: frozen random hidden layer,
batch (and imbalance-weighted) least squares training and prediction."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from utils.errors import IllConditionedError, InvalidArgumentError, ShapeError
from utils.validation import as_matrix, as_vector, require_positive_int

logger = logging.getLogger(__name__)

MAJORITY_LABEL = 1
MINORITY_LABEL = -1

# normal matrices above this condition number are refused when ridge == 0
CONDITION_LIMIT = 1e12


class ActivationKind(Enum):
    SIGMOID = "sigmoid"
    SINE = "sine"
    RADIAL_BASIS = "radial-basis"
    # identity map used by the linear least squares baseline
    LINEAR = "linear"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return _ACTIVATIONS[self](z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # written through exp(-|z|) so large |z| never overflows
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


_ACTIVATIONS: Dict[ActivationKind, Callable[[np.ndarray], np.ndarray]] = {
    ActivationKind.SIGMOID: _sigmoid,
    ActivationKind.SINE: np.sin,
    ActivationKind.RADIAL_BASIS: lambda z: np.exp(-np.square(z)),
    ActivationKind.LINEAR: lambda z: np.asarray(z, dtype=np.float64),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    """
    Random input layer of an ELM. Never trained after construction.

    Attributes:
        weights: Input weights W_r of shape (input_dim, hidden_dim).
        bias: Bias b_r of length hidden_dim.
        activation: Scalar function applied elementwise.
        seed: Seed the weights were drawn with (0 for deterministic layers).
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "bias", _frozen(self.bias))
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"weights {self.weights.shape} and bias {self.bias.shape} do not form a layer"
            )

    @property
    def input_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.weights.shape[1]

    def same_as(self, other: "HiddenLayer") -> bool:
        return (
            self.activation is other.activation
            and self.seed == other.seed
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )


@dataclass(frozen=True, eq=False)
class ElmModel:
    hidden: HiddenLayer
    output_weights: np.ndarray

    def __post_init__(self) -> None:
        w = _frozen(self.output_weights)
        if w.ndim == 1:
            w = _frozen(w.reshape(-1, 1))
        object.__setattr__(self, "output_weights", w)
        if w.ndim != 2 or w.shape[0] != self.hidden.hidden_dim:
            raise ShapeError(
                f"output weights {w.shape} do not match hidden_dim {self.hidden.hidden_dim}"
            )
        if not np.all(np.isfinite(w)):
            raise InvalidArgumentError("output weights contain non-finite values")

    @property
    def output_dim(self) -> int:
        return self.output_weights.shape[1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.output_weights))

    def __call__(self, x) -> np.ndarray:
        return predict_regression(self, x)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Supervised samples, one row per sample.

    Attributes:
        inputs: Matrix of shape (N, n).
        targets: Matrix of shape (N, y_d).
        labels: Optional vector of +1/-1 class labels of length N.
    """

    inputs: np.ndarray
    targets: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        inputs = as_matrix(self.inputs, name="inputs")
        targets = as_matrix(self.targets, name="targets")
        if inputs.shape[0] < 1:
            raise InvalidArgumentError("dataset must contain at least one sample")
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(
                f"inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}"
            )
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if self.labels is not None:
            labels = np.asarray(self.labels).reshape(-1).astype(np.int64)
            if labels.shape[0] != inputs.shape[0]:
                raise ShapeError(f"{labels.shape[0]} labels for {inputs.shape[0]} samples")
            if not np.all(np.isin(labels, (MAJORITY_LABEL, MINORITY_LABEL))):
                raise InvalidArgumentError("labels must be +1 or -1")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def head(self, n: int) -> "Dataset":
        labels = None if self.labels is None else self.labels[:n]
        return Dataset(self.inputs[:n], self.targets[:n], labels)


def label_counts(labels: np.ndarray) -> Tuple[int, int]:
    """Majority and minority counts of a label vector."""
    labels = np.asarray(labels)
    return int(np.sum(labels == MAJORITY_LABEL)), int(np.sum(labels == MINORITY_LABEL))


@dataclass(frozen=True)
class WeightSpec:
    """Per-sample weights 1 (majority) and r * f_s (minority)."""

    imbalance_ratio: float
    scale_factor: float = 1.0

    def __post_init__(self) -> None:
        if not self.imbalance_ratio >= 0:
            raise InvalidArgumentError(
                f"imbalance_ratio must be nonnegative, got {self.imbalance_ratio}"
            )
        if not self.scale_factor > 0:
            raise InvalidArgumentError(f"scale_factor must be positive, got {self.scale_factor}")

    @property
    def minority_weight(self) -> float:
        return self.imbalance_ratio * self.scale_factor

    @classmethod
    def from_labels(cls, labels: np.ndarray, scale_factor: float = 1.0) -> "WeightSpec":
        """Uses the observed majority to minority count ratio as r."""
        n_majority, n_minority = label_counts(labels)
        ratio = n_majority / n_minority if n_minority > 0 else 1.0
        return cls(imbalance_ratio=ratio, scale_factor=scale_factor)

    def sample_weights(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels).reshape(-1)
        gamma = np.where(labels == MINORITY_LABEL, self.minority_weight, 1.0)
        if np.any(gamma <= 0):
            raise InvalidArgumentError(
                "minority weight r * f_s must be positive when minority samples are present"
            )
        return gamma


def init_hidden_layer(
    input_dim: int,
    hidden_dim: int,
    activation: ActivationKind = ActivationKind.SIGMOID,
    seed: int = 0,
) -> HiddenLayer:
    """
    Draws a random hidden layer with W_r and b_r uniform on [-1, 1].

    The draw uses a counter-based Philox generator so identical arguments
    always produce bit-identical layers.

    Args:
        input_dim: Regressor dimension n.
        hidden_dim: Number of hidden units n_h.
        activation: Activation applied to every hidden unit.
        seed: Unsigned seed of the generator.

    Returns:
        The frozen hidden layer.
    """
    input_dim = require_positive_int(input_dim, "input_dim")
    hidden_dim = require_positive_int(hidden_dim, "hidden_dim")
    if seed < 0:
        raise InvalidArgumentError(f"seed must be unsigned, got {seed}")
    activation = ActivationKind(activation)

    rng = np.random.Generator(np.random.Philox(seed))
    weights = rng.uniform(-1.0, 1.0, size=(input_dim, hidden_dim))
    bias = rng.uniform(-1.0, 1.0, size=hidden_dim)
    return HiddenLayer(weights=weights, bias=bias, activation=activation, seed=int(seed))


def identity_layer(input_dim: int, intercept: bool = True) -> HiddenLayer:
    """
    Hidden layer that passes the regressor through unchanged.

    With intercept an extra constant unit is appended, which turns every
    trainer into a linear least squares (affine) model.
    """
    input_dim = require_positive_int(input_dim, "input_dim")
    weights = np.eye(input_dim)
    bias = np.zeros(input_dim)
    if intercept:
        weights = np.hstack([weights, np.zeros((input_dim, 1))])
        bias = np.append(bias, 1.0)
    return HiddenLayer(weights=weights, bias=bias, activation=ActivationKind.LINEAR)


def hidden_map(layer: HiddenLayer, x) -> np.ndarray:
    """Feature vector phi(x) = psi(W_r^T x + b_r) of length n_h."""
    x = as_vector(x, layer.input_dim)
    return layer.activation(x @ layer.weights + layer.bias)


def hidden_matrix(layer: HiddenLayer, inputs) -> np.ndarray:
    """Stacks hidden_map over the rows of inputs, giving H of shape (N, n_h)."""
    inputs = as_matrix(inputs, columns=layer.input_dim, name="inputs")
    return layer.activation(inputs @ layer.weights + layer.bias)


def solve_output_weights(
    features: np.ndarray,
    targets: np.ndarray,
    ridge: float,
    sample_weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Solves (H^T G H + ridge I) W = H^T G Y with a Cholesky factorisation.

    Args:
        features: Hidden layer output matrix H (N x n_h).
        targets: Target matrix Y (N x y_d).
        ridge: Regularisation coefficient, nonnegative.
        sample_weights: Diagonal of G, defaults to all ones.

    Returns:
        The output weights W (n_h x y_d).
    """
    if not ridge >= 0:
        raise InvalidArgumentError(f"ridge must be nonnegative, got {ridge}")
    features = as_matrix(features, name="features")
    targets = as_matrix(targets, name="targets")
    if features.shape[0] != targets.shape[0]:
        raise ShapeError(
            f"features have {features.shape[0]} rows but targets have {targets.shape[0]}"
        )

    weighted = features if sample_weights is None else features * sample_weights[:, None]
    normal = weighted.T @ features + ridge * np.eye(features.shape[1])
    rhs = weighted.T @ targets

    if ridge == 0:
        condition = float(np.linalg.cond(normal))
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise IllConditionedError(
                "normal matrix H^T H is singular at ridge 0", condition=condition
            )
    try:
        factor = linalg.cho_factor(normal)
    except linalg.LinAlgError as exc:
        raise IllConditionedError(f"normal matrix is not positive definite: {exc}") from exc
    return linalg.cho_solve(factor, rhs)


def batch_train(dataset: Dataset, layer: HiddenLayer, ridge: float) -> ElmModel:
    """Ridge regularised least squares fit of the output weights."""
    features = hidden_matrix(layer, dataset.inputs)
    weights = solve_output_weights(features, dataset.targets, ridge)
    logger.debug(f"batch_train: N={len(dataset)}, n_h={layer.hidden_dim}, ridge={ridge}")
    return ElmModel(layer, weights)


def batch_train_weighted(
    dataset: Dataset, layer: HiddenLayer, ridge: float, spec: WeightSpec
) -> ElmModel:
    """Imbalance weighted fit, W = (H^T G H + ridge I)^-1 H^T G Y."""
    if dataset.labels is None:
        raise InvalidArgumentError("batch_train_weighted requires labelled data")
    features = hidden_matrix(layer, dataset.inputs)
    gamma = spec.sample_weights(dataset.labels)
    weights = solve_output_weights(features, dataset.targets, ridge, sample_weights=gamma)
    logger.debug(
        f"batch_train_weighted: N={len(dataset)}, minority weight={spec.minority_weight:.4g}"
    )
    return ElmModel(layer, weights)


def predict_regression(model: ElmModel, x) -> np.ndarray:
    """
    W^T phi(x). A vector x gives a vector of length y_d, a matrix with one
    sample per row gives an (N, y_d) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return hidden_matrix(model.hidden, x) @ model.output_weights
    return hidden_map(model.hidden, x) @ model.output_weights


def sign_labels(scores) -> np.ndarray:
    """Labels from regression scores, sgn(0) = +1."""
    return np.where(np.asarray(scores) >= 0, MAJORITY_LABEL, MINORITY_LABEL).reshape(-1)


def predict_class(model: ElmModel, x):
    """
    Sign of the regression output with sgn(0) = +1.

    Returns an int for a single sample, an int array for a matrix of samples.
    """
    if model.output_dim != 1:
        raise InvalidArgumentError(
            f"classification needs a single output, model has {model.output_dim}"
        )
    score = predict_regression(model, x)
    labels = sign_labels(score)
    if np.asarray(x).ndim == 2:
        return labels
    return int(labels[0])
