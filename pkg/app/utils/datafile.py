"""Reading and writing the per-cycle data CSV

    cycle,u1,u2,u3,y1,y2,label

one row per cycle, label in {1, -1}, floats at full precision.
"""

import logging
import os

import numpy as np
import pandas as pd

from utils.elm_core import MAJORITY_LABEL, MINORITY_LABEL
from utils.errors import DataFormatError, OutputPathError
from utils.plant_sim import LabeledSeries

logger = logging.getLogger(__name__)

INPUT_COLUMNS = ["u1", "u2", "u3"]
OUTPUT_COLUMNS = ["y1", "y2"]
COLUMNS = ["cycle", *INPUT_COLUMNS, *OUTPUT_COLUMNS, "label"]


def to_frame(series: LabeledSeries) -> pd.DataFrame:
    frame = pd.DataFrame(series.u_series, columns=INPUT_COLUMNS)
    frame[OUTPUT_COLUMNS] = series.y_series
    frame.insert(0, "cycle", np.asarray(series.cycles, dtype=np.int64))
    frame["label"] = np.asarray(series.labels, dtype=np.int64)
    return frame[COLUMNS]


def write_data(path: str, series: LabeledSeries) -> None:
    directory = os.path.dirname(path)
    if directory and not os.path.isdir(directory):
        raise OutputPathError(f"directory {directory} does not exist")
    try:
        to_frame(series).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as exc:
        raise OutputPathError(f"cannot write data file {path}: {exc}") from exc
    logger.info(f"wrote {len(series)} cycles to {path}")


def read_data(path: str) -> LabeledSeries:
    """
    Parses a data CSV.

    :param path: str: location of the file
    :return: LabeledSeries: inputs, outputs, labels and cycle indices
    :raises DataFormatError: on a wrong header or any malformed row, naming
        the 1-based line of the file
    """
    try:
        raw = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except FileNotFoundError as exc:
        raise DataFormatError(f"data file {path} does not exist") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataFormatError(f"data file {path} is empty", line=1) from exc
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"cannot parse {path}: {exc}") from exc

    if list(raw.columns) != COLUMNS:
        raise DataFormatError(
            f"expected header {','.join(COLUMNS)}, got {','.join(map(str, raw.columns))}",
            line=1,
        )
    if raw.empty:
        raise DataFormatError(f"data file {path} has no rows", line=2)

    blank = np.flatnonzero(raw.fillna("").eq("").all(axis=1).to_numpy())
    if blank.size:
        raise DataFormatError("blank line in the data", line=int(blank[0]) + 2)

    numeric = raw.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DataFormatError(
            f"column {COLUMNS[col]} holds {raw.iat[row, col]!r}, expected a finite number",
            line=int(row) + 2,
        )
    # exact parse of the %.17g text
    numeric = raw.astype(np.float64)

    labels = numeric["label"].to_numpy()
    wrong = np.flatnonzero(~np.isin(labels, (MAJORITY_LABEL, MINORITY_LABEL)))
    if wrong.size:
        row = int(wrong[0])
        raise DataFormatError(f"label must be 1 or -1, got {raw.at[row, 'label']}", line=row + 2)

    cycles = numeric["cycle"].to_numpy()
    if np.any(cycles != np.round(cycles)):
        row = int(np.flatnonzero(cycles != np.round(cycles))[0])
        raise DataFormatError(f"cycle {raw.at[row, 'cycle']} is not an integer", line=row + 2)
    steps = np.flatnonzero(np.diff(cycles) <= 0)
    if steps.size:
        raise DataFormatError("cycle indices must be strictly increasing", line=int(steps[0]) + 3)

    logger.debug(f"read {len(raw)} cycles from {path}")
    return LabeledSeries(
        u_series=numeric[INPUT_COLUMNS].to_numpy(dtype=np.float64),
        y_series=numeric[OUTPUT_COLUMNS].to_numpy(dtype=np.float64),
        labels=labels.astype(np.int64),
        cycles=cycles.astype(np.int64),
    )
