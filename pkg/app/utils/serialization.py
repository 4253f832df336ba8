"""Versioned plain-text format for models and trainer checkpoints.

A model is

    ELMSTREAM v1
    n n_h y_d activation seed

    <W_r, n rows>

    <b_r, one row>

    <W, n_h rows>

with every float written with 17 significant digits, so a round trip is
bit-exact. A checkpoint appends, each after a blank line, a `STATE` section
with the learner counters (followed by M for OS-ELM, or by Gamma for a matrix
SG-ELM step), a `NARX` section with lags and run metadata including the
number of training rows, and the two `NORMALIZER` sections.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from utils.elm_core import ActivationKind, ElmModel, HiddenLayer
from utils.errors import DataFormatError, ElmStreamError, OutputPathError
from utils.metrics import Normalizer
from utils.narx import NarxConfig
from utils.online_learners import OselmState, SgelmState, check_stability

logger = logging.getLogger(__name__)

HEADER = "ELMSTREAM v1"

LearnerState = Union[OselmState, SgelmState]
Block = List[Tuple[int, str]]


def _rows(matrix: np.ndarray) -> str:
    matrix = np.atleast_2d(matrix)
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in matrix)


def dump_model(model: ElmModel) -> str:
    layer = model.hidden
    return "\n\n".join(
        [
            f"{HEADER}\n{layer.input_dim} {layer.hidden_dim} {model.output_dim} "
            f"{layer.activation.value} {layer.seed}",
            _rows(layer.weights),
            _rows(layer.bias),
            _rows(model.output_weights),
        ]
    ) + "\n"


def _blocks(text: str) -> List[Block]:
    blocks: List[Block] = []
    current: Block = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line:
            current.append((number, line))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _matrix(block: Block, rows: int, columns: int, name: str) -> np.ndarray:
    if len(block) != rows:
        raise DataFormatError(
            f"{name} has {len(block)} rows, expected {rows}", line=block[0][0] if block else None
        )
    out = np.empty((rows, columns))
    for i, (number, line) in enumerate(block):
        try:
            values = np.array(line.split(), dtype=np.float64)
        except ValueError as exc:
            raise DataFormatError(f"{name}: {exc}", line=number) from exc
        if values.shape[0] != columns:
            raise DataFormatError(
                f"{name} row has {values.shape[0]} values, expected {columns}", line=number
            )
        out[i] = values
    return out


class _BlockReader:
    def __init__(self, text: str) -> None:
        self._blocks = _blocks(text)
        self._pos = 0

    def __bool__(self) -> bool:
        return self._pos < len(self._blocks)

    def take(self, name: str) -> Block:
        if not self:
            raise DataFormatError(f"unexpected end of input, expected {name}")
        block = self._blocks[self._pos]
        self._pos += 1
        return block


def _parse_model(reader: _BlockReader) -> ElmModel:
    head = reader.take("header")
    if head[0][1] != HEADER:
        raise DataFormatError(f"expected {HEADER!r}, got {head[0][1]!r}", line=head[0][0])
    if len(head) != 2:
        raise DataFormatError("header must be followed by the dimension line", line=head[0][0])
    number, dims = head[1]
    parts = dims.split()
    if len(parts) != 5:
        raise DataFormatError("expected 'n n_h y_d activation seed'", line=number)
    try:
        n, n_h, y_d = (int(p) for p in parts[:3])
        activation = ActivationKind(parts[3])
        seed = int(parts[4])
    except ValueError as exc:
        raise DataFormatError(f"bad dimension line: {exc}", line=number) from exc

    weights = _matrix(reader.take("W_r"), n, n_h, "W_r")
    bias = _matrix(reader.take("b_r"), 1, n_h, "b_r")[0]
    output = _matrix(reader.take("W"), n_h, y_d, "W")
    layer = HiddenLayer(weights=weights, bias=bias, activation=activation, seed=seed)
    try:
        return ElmModel(layer, output)
    except ElmStreamError as exc:
        raise DataFormatError(f"invalid model: {exc}", line=number) from exc


def load_model(text: str) -> ElmModel:
    """
    Parses a model written by dump_model.

    Raises:
        DataFormatError: On a wrong header or malformed numeric rows.
    """
    return _parse_model(_BlockReader(text))


def _keyvalues(block: Block) -> Dict[str, str]:
    values = {}
    for number, line in block[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"expected key=value, got {line!r}", line=number)
        values[key.strip()] = value.strip()
    return values


def _field(values: Dict[str, str], key: str, cast, block: Block):
    if key not in values:
        raise DataFormatError(f"missing {key}", line=block[0][0])
    try:
        return cast(values[key])
    except ValueError as exc:
        raise DataFormatError(f"bad value for {key}: {values[key]!r}", line=block[0][0]) from exc


@dataclass(eq=False)
class Checkpoint:
    """
    Everything needed to resume or evaluate a run.

    Attributes:
        model: Output weights and hidden layer.
        narx: Lag orders and channel dimensions of the regressor.
        task: "identify" or "envelope".
        trainer: "linear", "batch", "oselm" or "sgelm".
        state: Online learner state, None for batch-trained models.
        input_normalizer, output_normalizer: Training-set normalisation.
        train_rows: Number of leading data rows the model was trained on.
    """

    model: ElmModel
    narx: NarxConfig
    task: str
    trainer: str
    state: Optional[LearnerState] = None
    input_normalizer: Optional[Normalizer] = None
    output_normalizer: Optional[Normalizer] = None
    train_rows: Optional[int] = None
    extra: Dict[str, str] = field(default_factory=dict)


def _dump_state(state: LearnerState) -> str:
    kind = "oselm" if isinstance(state, OselmState) else "sgelm"
    lines = [
        f"STATE {kind}",
        f"samples_seen={state.samples_seen}",
        f"majority_count={state.majority_count}",
        f"minority_count={state.minority_count}",
        f"scale_factor={state.scale_factor:.17g}",
    ]
    sections = []
    if isinstance(state, SgelmState):
        if state.is_scalar_step:
            lines.append(f"step={float(state.step):.17g}")
        else:
            lines.append("step=matrix")
            sections.append(_rows(state.step))
    else:
        sections.append(_rows(state.covariance))
    return "\n\n".join(["\n".join(lines), *sections])


def dump_checkpoint(checkpoint: Checkpoint) -> str:
    parts = [dump_model(checkpoint.model).rstrip("\n")]
    if checkpoint.state is not None:
        parts.append(_dump_state(checkpoint.state))
    narx = checkpoint.narx
    meta = [
        "NARX",
        f"input_lags={narx.input_lags}",
        f"output_lags={narx.output_lags}",
        f"input_dim={narx.input_dim}",
        f"output_dim={narx.output_dim}",
        f"task={checkpoint.task}",
        f"trainer={checkpoint.trainer}",
    ]
    if checkpoint.train_rows is not None:
        meta.append(f"train_rows={checkpoint.train_rows}")
    meta += [f"{key}={value}" for key, value in checkpoint.extra.items()]
    parts.append("\n".join(meta))
    for name, normalizer in (
        ("input", checkpoint.input_normalizer),
        ("output", checkpoint.output_normalizer),
    ):
        if normalizer is not None:
            parts.append(
                f"NORMALIZER {name}\n{_rows(normalizer.minimum)}\n{_rows(normalizer.maximum)}"
            )
    return "\n\n".join(parts) + "\n"


def _parse_state(block: Block, reader: _BlockReader, model: ElmModel) -> LearnerState:
    kind = block[0][1].split()[1] if len(block[0][1].split()) == 2 else ""
    values = _keyvalues(block)
    counters = dict(
        samples_seen=_field(values, "samples_seen", int, block),
        majority_count=_field(values, "majority_count", int, block),
        minority_count=_field(values, "minority_count", int, block),
        scale_factor=_field(values, "scale_factor", float, block),
    )
    n_h = model.hidden.hidden_dim
    weights = np.array(model.output_weights)

    if kind == "oselm":
        covariance = _matrix(reader.take("M"), n_h, n_h, "M")
        return OselmState(hidden=model.hidden, weights=weights, covariance=covariance, **counters)
    if kind == "sgelm":
        if values.get("step") == "matrix":
            step = _matrix(reader.take("step matrix"), n_h, n_h, "step matrix")
        else:
            step = _field(values, "step", float, block)
        return SgelmState(
            hidden=model.hidden,
            weights=weights,
            step=step,
            verdict=check_stability(step),
            **counters,
        )
    raise DataFormatError(f"unknown learner state {block[0][1]!r}", line=block[0][0])


def parse_checkpoint(text: str) -> Checkpoint:
    reader = _BlockReader(text)
    model = _parse_model(reader)
    state = None
    meta: Optional[Dict[str, str]] = None
    meta_block: Block = []
    normalizers: Dict[str, Normalizer] = {}

    while reader:
        block = reader.take("section")
        number, title = block[0]
        if title.startswith("STATE"):
            state = _parse_state(block, reader, model)
        elif title == "NARX":
            meta, meta_block = _keyvalues(block), block
        elif title.startswith("NORMALIZER"):
            name = title.split()[-1]
            if len(block) != 3:
                raise DataFormatError(f"{title} needs a min row and a max row", line=number)
            bounds = _matrix(block[1:], 2, len(block[1][1].split()), title)
            try:
                normalizers[name] = Normalizer(bounds[0], bounds[1])
            except ElmStreamError as exc:
                raise DataFormatError(f"{title}: {exc}", line=number) from exc
        else:
            raise DataFormatError(f"unknown section {title!r}", line=number)

    if meta is None:
        raise DataFormatError("checkpoint has no NARX section")
    lags = {
        key: _field(meta, key, int, meta_block)
        for key in ("input_lags", "output_lags", "input_dim", "output_dim")
    }
    try:
        narx = NarxConfig(**lags)
    except ElmStreamError as exc:
        raise DataFormatError(f"NARX: {exc}", line=meta_block[0][0]) from exc
    if narx.regressor_dim != model.hidden.input_dim:
        raise DataFormatError(
            f"NARX regressor has {narx.regressor_dim} entries, model expects "
            f"{model.hidden.input_dim}",
            line=meta_block[0][0],
        )
    train_rows = None
    if "train_rows" in meta:
        train_rows = _field(meta, "train_rows", int, meta_block)
        if train_rows < 1:
            raise DataFormatError(
                f"train_rows must be positive, got {train_rows}", line=meta_block[0][0]
            )
    known = {"input_lags", "output_lags", "input_dim", "output_dim", "task", "trainer"}
    known.add("train_rows")
    return Checkpoint(
        model=model,
        narx=narx,
        task=_field(meta, "task", str, meta_block),
        trainer=_field(meta, "trainer", str, meta_block),
        state=state,
        input_normalizer=normalizers.get("input"),
        output_normalizer=normalizers.get("output"),
        train_rows=train_rows,
        extra={k: v for k, v in meta.items() if k not in known},
    )


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(dump_checkpoint(checkpoint))
    except OSError as exc:
        raise OutputPathError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info(f"checkpoint written to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    return parse_checkpoint(text)
