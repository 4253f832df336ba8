"""Training and evaluation driver shared by the command line and the dashboard."""

import hashlib
import logging
import os
import threading
import time
import uuid
from collections import OrderedDict
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from utils.config import RunConfig
from utils.elm_core import (
    ActivationKind,
    Dataset,
    ElmModel,
    HiddenLayer,
    WeightSpec,
    batch_train,
    batch_train_weighted,
    hidden_matrix,
    identity_layer,
    init_hidden_layer,
    predict_regression,
    sign_labels,
)
from utils.errors import DataFormatError, InvalidArgumentError, ShapeError
from utils.metrics import (
    ConfusionCounts,
    Normalizer,
    fit_normalizer,
    imbalance_metrics,
    normalized_rmse,
)
from utils.narx import NarxConfig, build_regressors, msap_predict, osap_predict
from utils.online_learners import (
    LyapunovMonitor,
    OselmState,
    SgelmState,
    oselm_init,
    oselm_update,
    oselm_update_weighted,
    safe_step_size,
    sgelm_init,
    sgelm_update,
    sgelm_update_weighted,
)
from utils.plant_sim import AprbsConfig, LabeledSeries, PlantConfig, generate_aprbs, simulate_plant
from utils.serialization import Checkpoint
from utils.validation import require_positive_int

logger = logging.getLogger(__name__)

CACHE_FOLDER = ".cache"

# the synthetic plant exposes u1..u3 and y1, y2
PLANT_INPUTS = 3
PLANT_OUTPUTS = 2


def aprbs_config(config: RunConfig) -> AprbsConfig:
    config = config.resolved()
    return AprbsConfig(
        lower=(config.u1_min, 0.0, 0.0),
        upper=(config.u1_max, 1.0, 1.0),
        min_hold=config.min_hold,
        max_hold=config.max_hold,
        length=config.length,
        seed=config.data_seed,
    )


def generate_series(config: RunConfig, cache: bool = False) -> LabeledSeries:
    """
    Excites the synthetic plant with an A-PRBS and labels the result.

    Args:
        config: Run configuration, task defaults are resolved here.
        cache: Whether to keep the series under .cache, keyed by an md5 hash of
            the generator configuration.

    Returns:
        The labelled series of config.length cycles.
    """
    aprbs = aprbs_config(config)
    plant = PlantConfig(noise_std=config.noise_std)

    # both configs are frozen dataclasses with a stable repr
    hs = hashlib.md5(repr({"aprbs": aprbs, "plant": plant}).encode("utf-8")).hexdigest()
    file_path = os.path.join(CACHE_FOLDER, f"plant_{hs}.npz")
    if cache and os.path.isfile(file_path):
        with np.load(file_path) as cached:
            logger.debug(f"loaded cached series {file_path}")
            return LabeledSeries(cached["u"], cached["y"], cached["labels"])

    series = simulate_plant(plant, generate_aprbs(aprbs), seed=aprbs.seed)

    if cache:
        os.makedirs(CACHE_FOLDER, exist_ok=True)
        np.savez(file_path, u=series.u_series, y=series.y_series, labels=series.labels)
    return series


class Instructor:
    def __init__(self, config: RunConfig, series: LabeledSeries) -> None:
        """
        Prepares a training run: splits off the training rows, fits the
        normalizers on them, builds the NARX samples and draws the hidden layer.

        Args:
            config: Run configuration; task dependent defaults are resolved.
            series: Full data series, the first train_size rows are used.
        """
        self.config = config.resolved()
        cfg = self.config

        train_rows = min(cfg.train_size, len(series))
        self.train_series = series.slice(0, train_rows)
        self.input_normalizer = fit_normalizer(self.train_series.u_series)
        self.output_normalizer = fit_normalizer(self.train_series.y_series)

        self.narx = NarxConfig(
            input_lags=cfg.input_lags,
            output_lags=cfg.output_lags,
            input_dim=PLANT_INPUTS,
            output_dim=PLANT_OUTPUTS,
        )
        stream = build_regressors(
            self.input_normalizer.apply(self.train_series.u_series),
            self.output_normalizer.apply(self.train_series.y_series),
            self.narx,
            labels=self.train_series.labels,
        )
        self.dataset: Dataset = stream.to_dataset(label_targets=cfg.task == "envelope")
        self.weighted = bool(cfg.weighted)

        if cfg.trainer == "linear":
            self.layer: HiddenLayer = identity_layer(self.narx.regressor_dim)
        else:
            self.layer = init_hidden_layer(
                self.narx.regressor_dim,
                cfg.hidden_dim,
                ActivationKind(cfg.activation),
                cfg.seed,
            )

        if cfg.is_online:
            if cfg.init_size > len(self.dataset):
                raise InvalidArgumentError(
                    f"init_size {cfg.init_size} exceeds the {len(self.dataset)} training "
                    f"samples ({train_rows} rows); online trainers need at least "
                    f"init_size + {self.narx.max_lag} rows"
                )
            self.init_size = cfg.init_size
        else:
            self.init_size = len(self.dataset)

        self.state: Optional[OselmState | SgelmState] = None
        self._model: Optional[ElmModel] = None
        self.monitor: Optional[LyapunovMonitor] = None
        self.position = 0
        self.training_time = 0.0

    @classmethod
    def from_config(cls, config: RunConfig, cache: bool = False) -> "Instructor":
        return cls(config, generate_series(config, cache=cache))

    @property
    def initialized(self) -> bool:
        return self.monitor is not None

    @property
    def finished(self) -> bool:
        return self.initialized and self.position >= len(self.dataset)

    @property
    def model(self) -> ElmModel:
        if not self.initialized:
            raise InvalidArgumentError("the instructor has not been initialised")
        return self.state.model if self.state is not None else self._model

    def _spec(self, chunk: Dataset) -> Optional[WeightSpec]:
        if not self.weighted:
            return None
        return WeightSpec.from_labels(chunk.labels, self.config.scale_factor)

    def initialize(self) -> None:
        """Batch fit on the first init_size samples (all of them for batch trainers)."""
        cfg = self.config
        chunk = self.dataset.head(self.init_size)
        spec = self._spec(chunk)

        if cfg.trainer == "oselm":
            self.state = oselm_init(chunk, self.layer, cfg.ridge, spec)
        else:
            if spec is None:
                model = batch_train(chunk, self.layer, cfg.ridge)
            else:
                model = batch_train_weighted(chunk, self.layer, cfg.ridge, spec)
            if cfg.trainer == "sgelm":
                step = cfg.step
                if step == "auto":
                    step = safe_step_size(hidden_matrix(self.layer, chunk.inputs))
                    logger.info(f"automatic step size {step:.6g}")
                self.state = sgelm_init(
                    model,
                    step,
                    scale_factor=cfg.scale_factor,
                    allow_unstable=cfg.allow_unstable,
                    labels=chunk.labels if self.weighted else None,
                )
            else:
                self._model = model

        step = self.state.step if isinstance(self.state, SgelmState) else None
        self.monitor = LyapunovMonitor(step=step)
        if self.state is not None:
            self.monitor.record(self.state)
        else:
            self.monitor.weight_norms.append(self._model.norm())
        self.position = self.init_size

    def step(self, n: int = 1) -> int:
        """
        Streams the next n samples through the online trainer.

        Returns:
            The number of samples actually consumed.
        """
        if not self.initialized:
            self.initialize()
        stop = min(self.position + n, len(self.dataset))
        if self.state is None or stop <= self.position:
            return 0

        inputs, targets, labels = self.dataset.inputs, self.dataset.targets, self.dataset.labels
        sgelm = isinstance(self.state, SgelmState)
        for i in range(self.position, stop):
            if self.weighted:
                update = sgelm_update_weighted if sgelm else oselm_update_weighted
                update(self.state, inputs[i], targets[i], int(labels[i]))
            else:
                update = sgelm_update if sgelm else oselm_update
                update(self.state, inputs[i], targets[i])
            self.monitor.record(self.state)

        consumed = stop - self.position
        self.position = stop
        logger.debug(f"streamed {consumed} samples, {len(self.dataset) - stop} left")
        return consumed

    def train(self) -> Dict[str, object]:
        """Initialises and streams the remaining samples, returns the training report."""
        start = time.perf_counter()
        if not self.initialized:
            self.initialize()
        self.step(len(self.dataset))
        self.training_time = time.perf_counter() - start
        logger.info(
            f"{self.config.trainer} trained on {len(self.dataset)} samples in "
            f"{self.training_time:.4f} s"
        )
        return self.report()

    def report(self) -> Dict[str, object]:
        cfg = self.config
        values: Dict[str, object] = {
            "task": cfg.task,
            "trainer": cfg.trainer,
            "hidden_dim": self.layer.hidden_dim,
            "weighted": str(self.weighted).lower(),
            "samples_init": self.init_size,
            "samples_streamed": self.position - self.init_size,
            "minority_fraction": self.train_series.minority_fraction,
        }
        if cfg.record_timing:
            values["training_time"] = f"{self.training_time:.4f}"
        values["weight_norm_initial"] = self.monitor.weight_norms[0]
        values["weight_norm_final"] = self.monitor.weight_norms[-1]
        values["weight_norm_max"] = self.monitor.max_weight_norm
        if isinstance(self.state, SgelmState):
            values["step"] = (
                float(self.state.step) if self.state.is_scalar_step else "matrix"
            )
            values["stability"] = str(self.state.verdict)
            values["lambda_max"] = self.state.verdict.max_eigenvalue
            values["nonpositive_margins"] = self.monitor.nonpositive_margins
        return values

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            model=self.model,
            narx=self.narx,
            task=self.config.task,
            trainer=self.config.trainer,
            state=self.state,
            input_normalizer=self.input_normalizer,
            output_normalizer=self.output_normalizer,
            train_rows=len(self.train_series),
            extra={"weighted": str(self.weighted).lower()},
        )


class InstructorPool:
    """
    Live dashboard runs, one per started training.

    Runs are keyed by a random id that the browser session keeps, so tabs
    with identical settings never share a learner. At most max_runs runs are
    kept and the least recently used one is dropped first. A run is only
    touched while its lock is held.
    """

    def __init__(self, max_runs: int = 8) -> None:
        self.max_runs = require_positive_int(max_runs, "max_runs")
        self._runs: "OrderedDict[str, Tuple[threading.Lock, Instructor]]" = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._runs)

    def __contains__(self, run_id: str) -> bool:
        with self._lock:
            return run_id in self._runs

    def start(self, instructor: Instructor) -> str:
        run_id = uuid.uuid4().hex
        with self._lock:
            self._runs[run_id] = (threading.Lock(), instructor)
            while len(self._runs) > self.max_runs:
                dropped, _ = self._runs.popitem(last=False)
                logger.info(f"dropped dashboard run {dropped}")
        return run_id

    @contextmanager
    def hold(self, run_id: str) -> Iterator[Instructor]:
        """
        Yields the instructor of run_id with its lock held.

        Raises:
            InvalidArgumentError: If the run was never started or has been dropped.
        """
        with self._lock:
            if run_id not in self._runs:
                raise InvalidArgumentError(f"training run {run_id} is no longer available")
            self._runs.move_to_end(run_id)
            run_lock, instructor = self._runs[run_id]
        with run_lock:
            yield instructor


def all_majority_checkpoint(instructor: Instructor) -> Checkpoint:
    """Zero output weights: every score is 0, which classifies as +1."""
    zeros = np.zeros((instructor.layer.hidden_dim, 1))
    return Checkpoint(
        model=ElmModel(instructor.layer, zeros),
        narx=instructor.narx,
        task=instructor.config.task,
        trainer="batch",
        input_normalizer=instructor.input_normalizer,
        output_normalizer=instructor.output_normalizer,
        train_rows=len(instructor.train_series),
    )


def held_out_start(
    config: RunConfig, series: LabeledSeries, train_rows: Optional[int] = None
) -> int:
    """
    First evaluated row.

    With train_rows known from the checkpoint, evaluation starts right after
    the training rows; the whole series is scored only when the model was
    trained on exactly all of it. Without it the split falls back to the
    configured train_size.

    Raises:
        InvalidArgumentError: If the checkpoint was trained on more rows than
            the series holds.
    """
    if train_rows is None:
        config = config.resolved()
        return config.train_size if len(series) > config.train_size else 0
    if train_rows > len(series):
        raise InvalidArgumentError(
            f"checkpoint was trained on {train_rows} rows, the data has only {len(series)}"
        )
    if train_rows == len(series):
        logger.warning("the model was trained on the whole series, scoring the training rows")
        return 0
    return train_rows


def _check_dimensions(
    checkpoint: Checkpoint, series: LabeledSeries
) -> Tuple[Normalizer, Normalizer]:
    narx = checkpoint.narx
    if narx.input_dim != series.u_series.shape[1] or narx.output_dim != series.y_series.shape[1]:
        raise ShapeError(
            f"checkpoint expects {narx.input_dim} inputs and {narx.output_dim} outputs, data "
            f"has {series.u_series.shape[1]} and {series.y_series.shape[1]}"
        )
    if checkpoint.model.hidden.input_dim != narx.regressor_dim:
        raise ShapeError(
            f"model takes {checkpoint.model.hidden.input_dim} regressor entries, lags give "
            f"{narx.regressor_dim}"
        )
    if checkpoint.input_normalizer is None or checkpoint.output_normalizer is None:
        raise DataFormatError("checkpoint carries no normalizers")
    if (
        checkpoint.input_normalizer.channels != narx.input_dim
        or checkpoint.output_normalizer.channels != narx.output_dim
    ):
        raise ShapeError("checkpoint normalizers do not match the data channels")
    return checkpoint.input_normalizer, checkpoint.output_normalizer


def evaluate(
    checkpoint: Checkpoint, series: LabeledSeries, config: RunConfig
) -> Tuple[Dict[str, object], pd.DataFrame]:
    """
    Evaluates a frozen model on the held-out part of series.

    identify: OSAP RMSE over every held-out cycle, MSAP RMSE over the last
    `horizon` held-out cycles and the OSAP RMSE over that same window.
    envelope: TPR, TNR, GM and TA of the sign classifier.

    Returns:
        The metrics report and the per-cycle prediction table.
    """
    config = config.resolved()
    in_norm, out_norm = _check_dimensions(checkpoint, series)
    narx = checkpoint.narx
    u_n = in_norm.apply(series.u_series)
    y_n = out_norm.apply(series.y_series)
    stream = build_regressors(u_n, y_n, narx, labels=series.labels)

    start = held_out_start(config, series, checkpoint.train_rows)
    mask = stream.indices >= start
    if not mask.any():
        raise InvalidArgumentError(f"no samples left to evaluate after cycle {start}")
    indices = stream.indices[mask]
    model = checkpoint.model
    values: Dict[str, object] = {
        "task": checkpoint.task,
        "trainer": checkpoint.trainer,
        "eval_start": int(series.cycles[indices[0]]),
        "samples": int(indices.shape[0]),
    }

    if checkpoint.task == "envelope":
        if model.output_dim != 1:
            raise ShapeError(f"envelope model must have one output, has {model.output_dim}")
        scores = predict_regression(model, stream.inputs[mask]).reshape(-1)
        predicted = sign_labels(scores)
        truth = series.labels[indices]
        counts = ConfusionCounts.from_predictions(truth, predicted)
        values.update(imbalance_metrics(counts))
        values.update(tp=counts.tp, tn=counts.tn, fp=counts.fp, fn=counts.fn)
        frame = pd.DataFrame(
            {
                "cycle": series.cycles[indices],
                "label": truth,
                "score": scores,
                "predicted": predicted,
            }
        )
        return values, frame

    if model.output_dim != narx.output_dim:
        raise ShapeError(f"model has {model.output_dim} outputs, data {narx.output_dim}")
    truth = series.y_series[indices]
    osap = out_norm.invert(predict_regression(model, stream.inputs[mask]))
    values["osap_rmse"] = normalized_rmse(truth, osap, out_norm)

    horizon = min(config.horizon, indices.shape[0])
    if horizon < config.horizon:
        logger.warning(f"only {horizon} held-out cycles, MSAP horizon cut from {config.horizon}")
    first = int(indices[-horizon])
    window = slice(first, first + horizon)
    msap = out_norm.invert(
        msap_predict(model, u_n[: first - 1 + horizon], y_n[:first], horizon, narx)
    )
    osap_window = out_norm.invert(
        np.array(
            [osap_predict(model, u_n[:k], y_n[:k], narx) for k in range(first, first + horizon)]
        )
    )
    values["horizon"] = horizon
    values["msap_rmse"] = normalized_rmse(series.y_series[window], msap, out_norm)
    values["osap_rmse_window"] = normalized_rmse(series.y_series[window], osap_window, out_norm)

    frame = pd.DataFrame({"cycle": series.cycles[indices]})
    frame[["y1", "y2"]] = truth
    frame[["y1_osap", "y2_osap"]] = osap
    msap_column = np.full_like(osap, np.nan)
    msap_column[-horizon:] = msap
    frame[["y1_msap", "y2_msap"]] = msap_column
    return values, frame


def compare(config: RunConfig, series: LabeledSeries) -> pd.DataFrame:
    """
    Trains and evaluates every trainer on the same data and hidden layer seed.
    The envelope task adds an all-majority baseline and an unweighted SG-ELM row.

    Returns:
        One row per trainer: training time (when recorded), the task metrics
        and the final ||W||_F.
    """
    config = config.resolved()
    runs: List[Tuple[str, RunConfig]] = [
        (trainer, config.replace(trainer=trainer))
        for trainer in ("linear", "batch", "oselm", "sgelm")
    ]
    if config.task == "envelope":
        runs.append(("sgelm-unweighted", config.replace(trainer="sgelm", weighted=False)))

    rows = []
    for name, run in runs:
        instructor = Instructor(run, series)
        trained = instructor.train()
        metrics, _ = evaluate(instructor.checkpoint(), series, run)
        rows.append(_table_row(name, run, trained, metrics))
        if name == "batch" and config.task == "envelope":
            baseline, _ = evaluate(all_majority_checkpoint(instructor), series, run)
            rows.append(_table_row("all-majority", run, None, baseline))
    return pd.DataFrame(rows)


def _table_row(
    name: str, config: RunConfig, trained: Optional[Dict[str, object]], metrics: Dict[str, object]
) -> Dict[str, object]:
    row: Dict[str, object] = {"trainer": name}
    if config.record_timing:
        row["training_time"] = float(trained["training_time"]) if trained else 0.0
    if config.task == "identify":
        row.update(osap_rmse=metrics["osap_rmse"], msap_rmse=metrics["msap_rmse"])
    else:
        row.update({key: metrics[key] for key in ("TPR", "TNR", "TA", "GM")})
    row["weight_norm"] = float(trained["weight_norm_final"]) if trained else 0.0
    return row


def format_table(frame: pd.DataFrame) -> str:
    formatters = {"training_time": "{:.4f}".format}
    return frame.to_string(index=False, float_format="{:.6g}".format, formatters=formatters) + "\n"

