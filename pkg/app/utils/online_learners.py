"""Sequential trainers for the ELM output weights.

OS-ELM propagates the covariance of the least squares estimate (recursive
least squares), SG-ELM takes one stochastic gradient step per sample with a
fixed step matrix whose largest eigenvalue decides the stability class.
Both learners are single-writer: updates mutate the state in place and
return it, and a read-only ElmModel snapshot is available via `state.model`.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Union

import numpy as np
from scipy import linalg

from utils.elm_core import (
    CONDITION_LIMIT,
    MAJORITY_LABEL,
    MINORITY_LABEL,
    Dataset,
    ElmModel,
    HiddenLayer,
    WeightSpec,
    hidden_map,
    hidden_matrix,
    label_counts,
)
from utils.errors import (
    IllConditionedError,
    InvalidArgumentError,
    ShapeError,
    UnstableStepError,
)
from utils.validation import as_matrix, as_vector

logger = logging.getLogger(__name__)

Step = Union[float, np.ndarray]

SYMMETRY_TOLERANCE = 1e-9


class StabilityClass(Enum):
    CONVERGENT = "convergent"
    BOUNDED = "bounded"
    VIOLATING = "violating"


@dataclass(frozen=True)
class StabilityVerdict:
    stability_class: StabilityClass
    max_eigenvalue: float

    def __str__(self) -> str:
        return self.stability_class.value


def _label(label) -> int:
    if label not in (MAJORITY_LABEL, MINORITY_LABEL):
        raise InvalidArgumentError(f"label must be +1 or -1, got {label}")
    return int(label)


def running_ratio(majority_count: int, minority_count: int) -> float:
    """
    Majority to minority count ratio seen so far.

    Before any minority sample the ratio is the majority count, and before
    any majority sample it is 1 so a minority update is never switched off.
    """
    if majority_count == 0:
        return 1.0
    if minority_count == 0:
        return float(majority_count)
    return majority_count / minority_count


def _step_matrix(step: Step, hidden_dim: int) -> np.ndarray:
    if np.ndim(step) == 0:
        return float(step) * np.eye(hidden_dim)
    step = np.asarray(step, dtype=np.float64)
    if step.shape != (hidden_dim, hidden_dim):
        raise ShapeError(f"step matrix {step.shape} does not match hidden_dim {hidden_dim}")
    return step


def check_stability(step_matrix: Step) -> StabilityVerdict:
    """
    Classifies a step matrix by its largest eigenvalue.

    Args:
        step_matrix: Symmetric matrix Gamma_SG, or a scalar gamma for gamma*I.

    Returns:
        convergent for 0 < lambda_max < 1, bounded for 1 <= lambda_max < 2,
        violating otherwise.
    """
    if np.ndim(step_matrix) == 0:
        lam = float(step_matrix)
    else:
        gamma = np.asarray(step_matrix, dtype=np.float64)
        if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
            raise ShapeError(f"step matrix must be square, got shape {gamma.shape}")
        asym = np.linalg.norm(gamma - gamma.T)
        if asym > SYMMETRY_TOLERANCE * max(1.0, np.linalg.norm(gamma)):
            raise InvalidArgumentError(f"step matrix is not symmetric (asymmetry {asym:.3e})")
        lam = float(linalg.eigvalsh(gamma)[-1])

    if 0 < lam < 1:
        cls = StabilityClass.CONVERGENT
    elif 1 <= lam < 2:
        cls = StabilityClass.BOUNDED
    else:
        cls = StabilityClass.VIOLATING
    return StabilityVerdict(cls, lam)


@dataclass(eq=False)
class OselmState:
    """
    Recursive least squares state over the ELM output weights.

    Attributes:
        hidden: The frozen hidden layer.
        weights: Current output weights W (n_h x y_d), updated in place.
        covariance: M = K^-1 (n_h x n_h), kept symmetric.
        samples_seen: Number of samples absorbed, initialisation chunk included.
        majority_count, minority_count: Label counts for the weighted update.
        scale_factor: f_s of the weighted update.
    """

    hidden: HiddenLayer
    weights: np.ndarray
    covariance: np.ndarray
    samples_seen: int = 0
    majority_count: int = 0
    minority_count: int = 0
    scale_factor: float = 1.0
    last_error: Optional[np.ndarray] = None
    last_features: Optional[np.ndarray] = None

    @property
    def model(self) -> ElmModel:
        return ElmModel(self.hidden, self.weights.copy())


@dataclass(eq=False)
class SgelmState:
    """
    Stochastic gradient state. `step` is a scalar gamma (Gamma_SG = gamma I)
    unless a full matrix was supplied.
    """

    hidden: HiddenLayer
    weights: np.ndarray
    step: Step
    verdict: StabilityVerdict
    scale_factor: float = 1.0
    majority_count: int = 0
    minority_count: int = 0
    samples_seen: int = 0
    last_error: Optional[np.ndarray] = None
    last_features: Optional[np.ndarray] = None
    gain_warned: bool = False

    @property
    def model(self) -> ElmModel:
        return ElmModel(self.hidden, self.weights.copy())

    @property
    def step_matrix(self) -> np.ndarray:
        return _step_matrix(self.step, self.hidden.hidden_dim)

    @property
    def is_scalar_step(self) -> bool:
        return np.ndim(self.step) == 0


def oselm_init(
    init_chunk: Dataset,
    layer: HiddenLayer,
    ridge: float,
    spec: Optional[WeightSpec] = None,
) -> OselmState:
    """
    Initialisation step of OS-ELM: W_0 = K_0^-1 H_0^T Y_0 with
    K_0 = H_0^T H_0 + ridge I, and M = K_0^-1.

    With a WeightSpec the chunk is weighted as in batch_train_weighted and the
    label counters start from the chunk labels.
    """
    if init_chunk is None or len(init_chunk) < 1:
        raise InvalidArgumentError("oselm_init needs a nonempty initialisation chunk")
    if not ridge >= 0:
        raise InvalidArgumentError(f"ridge must be nonnegative, got {ridge}")

    features = hidden_matrix(layer, init_chunk.inputs)
    weighted = features
    scale_factor = 1.0
    if spec is not None:
        if init_chunk.labels is None:
            raise InvalidArgumentError("weighted initialisation requires labels")
        weighted = features * spec.sample_weights(init_chunk.labels)[:, None]
        scale_factor = spec.scale_factor

    k0 = weighted.T @ features + ridge * np.eye(layer.hidden_dim)
    if ridge == 0:
        condition = float(np.linalg.cond(k0))
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise IllConditionedError("K_0 is singular at ridge 0", condition=condition)
    try:
        factor = linalg.cho_factor(k0)
    except linalg.LinAlgError as exc:
        raise IllConditionedError(f"K_0 is not positive definite: {exc}") from exc

    covariance = linalg.cho_solve(factor, np.eye(layer.hidden_dim))
    covariance = 0.5 * (covariance + covariance.T)
    weights = linalg.cho_solve(factor, weighted.T @ init_chunk.targets)
    majority, minority = (0, 0) if init_chunk.labels is None else label_counts(init_chunk.labels)

    logger.info(f"OS-ELM initialised on {len(init_chunk)} samples, n_h={layer.hidden_dim}")
    return OselmState(
        hidden=layer,
        weights=np.array(weights),
        covariance=covariance,
        samples_seen=len(init_chunk),
        majority_count=majority,
        minority_count=minority,
        scale_factor=scale_factor,
    )


def _features_and_target(hidden: HiddenLayer, weights: np.ndarray, x, y):
    try:
        phi = hidden_map(hidden, x)
        target = as_vector(y, weights.shape[1], name="y")
    except InvalidArgumentError as exc:
        logger.warning(f"rejected sample: {exc}")
        raise
    return phi, target


def _rls_step(state: OselmState, phi: np.ndarray, y: np.ndarray, gain: float = 1.0) -> None:
    m_phi = state.covariance @ phi
    denom = 1.0 / gain + phi @ m_phi
    covariance = state.covariance - np.outer(m_phi, m_phi) / denom
    state.covariance = 0.5 * (covariance + covariance.T)
    error = y - phi @ state.weights
    state.weights += gain * np.outer(state.covariance @ phi, error)
    state.samples_seen += 1
    state.last_error = error
    state.last_features = phi


def oselm_update(state: OselmState, x, y) -> OselmState:
    """
    Sequential learning step with one sample, H = phi(x)^T:

        M <- M - M H^T (I + H M H^T)^-1 H M
        W <- W + M H^T (y^T - H W)

    Non-finite input raises InvalidArgumentError and leaves the state unchanged.
    """
    phi, target = _features_and_target(state.hidden, state.weights, x, y)
    _rls_step(state, phi, target)
    return state


def oselm_update_weighted(state: OselmState, x, y, label: int) -> OselmState:
    """Weighted recursive least squares; minority samples carry weight r * f_s."""
    label = _label(label)
    phi, target = _features_and_target(state.hidden, state.weights, x, y)
    gain = 1.0
    if label == MAJORITY_LABEL:
        state.majority_count += 1
    else:
        state.minority_count += 1
        gain = running_ratio(state.majority_count, state.minority_count) * state.scale_factor
    _rls_step(state, phi, target, gain=gain)
    return state


def sgelm_init(
    model: ElmModel,
    step: Step,
    scale_factor: float = 1.0,
    allow_unstable: bool = False,
    labels: Optional[np.ndarray] = None,
) -> SgelmState:
    """
    Creates an SG-ELM state starting from the output weights of model.

    Args:
        model: Initial model, usually the batch fit on the initialisation chunk.
        step: Scalar gamma or a full symmetric step matrix Gamma_SG.
        scale_factor: f_s of the imbalance weighted update, must be positive.
        allow_unstable: Accept violating-class or indefinite step matrices.
        labels: Labels already seen, used to seed the running imbalance ratio.

    Returns:
        The learner state with the stability verdict cached.
    """
    if not scale_factor > 0:
        raise InvalidArgumentError(f"scale_factor must be positive, got {scale_factor}")
    if np.ndim(step) == 0:
        step = float(step)
        smallest = step
    else:
        step = _step_matrix(step, model.hidden.hidden_dim).copy()
        smallest = None

    verdict = check_stability(step)
    if smallest is None:
        smallest = float(linalg.eigvalsh(step)[0])

    if not allow_unstable:
        if verdict.stability_class is StabilityClass.VIOLATING:
            raise UnstableStepError(
                f"step matrix has lambda_max = {verdict.max_eigenvalue:.6g}, "
                "outside the stable range (0, 2)"
            )
        if smallest <= 0:
            raise UnstableStepError("step matrix must be positive definite")
    if verdict.stability_class is not StabilityClass.CONVERGENT:
        logger.warning(
            f"SG-ELM step is {verdict} (lambda_max = {verdict.max_eigenvalue:.6g}); "
            "the error is not guaranteed to vanish"
        )

    majority, minority = (0, 0) if labels is None else label_counts(labels)
    logger.info(f"SG-ELM initialised, n_h={model.hidden.hidden_dim}, verdict={verdict}")
    return SgelmState(
        hidden=model.hidden,
        weights=np.array(model.output_weights),
        step=step,
        verdict=verdict,
        scale_factor=float(scale_factor),
        majority_count=majority,
        minority_count=minority,
    )


def _sg_step(state: SgelmState, phi: np.ndarray, y: np.ndarray, gain: float = 1.0) -> None:
    error = y - phi @ state.weights
    if state.is_scalar_step:
        state.weights += (gain * state.step) * np.outer(phi, error)
    else:
        state.weights += gain * np.outer(state.step @ phi, error)
    state.samples_seen += 1
    state.last_error = error
    state.last_features = phi


def sgelm_update(state: SgelmState, x, y) -> SgelmState:
    """W <- W + Gamma_SG phi e with the row error e = y - phi^T W."""
    phi, target = _features_and_target(state.hidden, state.weights, x, y)
    _sg_step(state, phi, target)
    return state


def sgelm_update_weighted(state: SgelmState, x, y, label: int) -> SgelmState:
    """
    Imbalance weighted SG-ELM step. Majority samples take the plain step,
    minority samples scale it by r * f_s where r is the running
    majority/minority ratio, counted after the arriving sample.
    """
    label = _label(label)
    phi, target = _features_and_target(state.hidden, state.weights, x, y)
    gain = 1.0
    if label == MAJORITY_LABEL:
        state.majority_count += 1
    else:
        state.minority_count += 1
        gain = running_ratio(state.majority_count, state.minority_count) * state.scale_factor
        if not state.gain_warned and gain * state.verdict.max_eigenvalue >= 2:
            state.gain_warned = True
            logger.warning(
                f"minority step reaches lambda_max = {gain * state.verdict.max_eigenvalue:.6g} "
                f"(gain {gain:.4g}), outside the stable range"
            )
    _sg_step(state, phi, target, gain=gain)
    return state


def step_margin(phi, step: Step) -> float:
    """2 - phi^T Gamma phi; V decreases on a step exactly when this is positive."""
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if np.ndim(step) == 0:
        return 2.0 - float(step) * float(phi @ phi)
    return 2.0 - float(phi @ np.asarray(step) @ phi)


def safe_step_size(features, margin: float = 0.5) -> float:
    """
    Scalar gamma = margin / max_i ||phi_i||^2, so that phi^T Gamma phi never
    exceeds margin on the given features.
    """
    features = as_matrix(features, name="features")
    peak = float(np.max(np.einsum("ij,ij->i", features, features)))
    if peak <= 0:
        raise InvalidArgumentError("all feature rows are zero, no step size can be derived")
    return margin / peak


def lyapunov_value(w_est, w_star, step_matrix: Step) -> float:
    """
    V = tr(W~^T Gamma^-1 W~) with W~ = W_star - W_est.

    Raises:
        ShapeError: If the two weight matrices differ in shape.
        IllConditionedError: If the step matrix is singular.
    """
    w_est = np.asarray(w_est, dtype=np.float64)
    w_star = np.asarray(w_star, dtype=np.float64)
    if w_est.shape != w_star.shape:
        raise ShapeError(f"W_est {w_est.shape} and W_star {w_star.shape} differ")
    w_tilde = (w_star - w_est).reshape(w_star.shape[0], -1)

    if np.ndim(step_matrix) == 0:
        if step_matrix == 0:
            raise IllConditionedError("step matrix is singular")
        return float(np.sum(w_tilde * w_tilde) / float(step_matrix))

    gamma = np.asarray(step_matrix, dtype=np.float64)
    if gamma.shape != (w_tilde.shape[0], w_tilde.shape[0]):
        raise ShapeError(f"step matrix {gamma.shape} does not match W {w_tilde.shape}")
    try:
        factor = linalg.cho_factor(gamma)
    except linalg.LinAlgError as exc:
        raise IllConditionedError(f"step matrix cannot be inverted: {exc}") from exc
    return float(np.sum(w_tilde * linalg.cho_solve(factor, w_tilde)))


class LyapunovMonitor:
    def __init__(
        self,
        step: Optional[Step] = None,
        w_star: Optional[np.ndarray] = None,
        tolerance: float = 1e-12,
    ) -> None:
        """
        Tracks the stability quantities of an online learner.

        With the true weights W_* known the Lyapunov value V is recorded at
        every step and increases beyond tolerance * V_0 are counted. Without
        W_* only ||W||_F and ||e|| are tracked.

        Args:
            step: Step matrix of the learner, needed for V and the margin.
            w_star: True weights of a realizable stream.
            tolerance: Relative slack on V increases.
        """
        if w_star is not None and step is None:
            raise InvalidArgumentError("the Lyapunov value needs the step matrix")
        self.step = step
        self.w_star = None if w_star is None else np.asarray(w_star, dtype=np.float64)
        self.tolerance = tolerance

        self.values: List[float] = []
        self.weight_norms: List[float] = []
        self.error_norms: List[float] = []
        self.margins: List[float] = []
        self.increases = 0
        self.nonpositive_margins = 0

    def record(self, state: Union[OselmState, SgelmState]) -> None:
        """Appends the current quantities of state, call once per update."""
        self.weight_norms.append(float(np.linalg.norm(state.weights)))
        if state.last_error is not None:
            self.error_norms.append(float(np.linalg.norm(state.last_error)))
        if self.step is not None and state.last_features is not None:
            margin = step_margin(state.last_features, self.step)
            self.margins.append(margin)
            if margin <= 0:
                self.nonpositive_margins += 1

        if self.w_star is None:
            return
        value = lyapunov_value(state.weights, self.w_star, self.step)
        if self.values and value > self.values[-1] + self.tolerance * self.values[0]:
            if self.increases == 0:
                logger.warning(
                    f"Lyapunov value increased at sample {state.samples_seen}: "
                    f"{self.values[-1]:.6g} -> {value:.6g}"
                )
            self.increases += 1
        self.values.append(value)

    @property
    def max_weight_norm(self) -> float:
        return max(self.weight_norms) if self.weight_norms else 0.0

    def is_non_increasing(self) -> bool:
        return self.increases == 0
