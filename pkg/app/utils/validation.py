from typing import Optional

import numpy as np

from utils.errors import InvalidArgumentError, ShapeError


def data_is_valid(main_data: Optional[dict], page_data: Optional[dict]) -> bool:
    """
    Checks if main data and page data exist and contain non-None values

    :param main_data: dict, optional: Main data from sidebar
    :param page_data: dict, optional: Page specific data
    :return: bool: Whether data is valid
    """
    return not (
        page_data is None
        or main_data is None
        or any([p is None for p in page_data.values()] + [p is None for p in main_data.values()])
    )


def as_vector(x, length: int, name: str = "x") -> np.ndarray:
    """
    Converts x into a finite float vector of the given length.

    :param x: array-like: input values
    :param length: int: expected number of entries
    :param name: str: argument name used in error messages
    :return: np.ndarray: 1-D float64 array
    """
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    if v.shape[0] != length:
        raise ShapeError(f"{name} has length {v.shape[0]}, expected {length}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return v


def as_matrix(x, columns: Optional[int] = None, name: str = "x") -> np.ndarray:
    """
    Converts x into a finite 2-D float matrix, promoting vectors to one column.

    :param x: array-like: input values
    :param columns: int, optional: expected number of columns
    :param name: str: argument name used in error messages
    :return: np.ndarray: 2-D float64 array
    """
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {m.ndim} dimensions")
    if columns is not None and m.shape[1] != columns:
        raise ShapeError(f"{name} has {m.shape[1]} columns, expected {columns}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return m


def require_positive_int(value: int, name: str) -> int:
    if int(value) != value or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value}")
    return int(value)
