"""Submodule providing coercion of nested lists into float matrices."""

from typing import Optional
import numpy as np
from fullstab.exceptions import ShapeMismatchError


def as_matrix(
    values, rows: Optional[int] = None, cols: Optional[int] = None, name: str = "matrix"
) -> np.ndarray:
    """Return the provided values as a two-dimensional float array.

    Missing values (None) become the zero matrix of the requested shape,
    and empty lists become matrices with zero rows.

    Parameters
    ----------
    values : array-like or None
        Row-major nested list.
    rows : Optional[int]
        Expected number of rows.
    cols : Optional[int]
        Expected number of columns.
    name : str
        Name used in error messages.
    """
    if values is None:
        if rows is None or cols is None:
            raise ShapeMismatchError(name, (rows, cols), ())
        return np.zeros((rows, cols))
    matrix = np.asarray(values, dtype=float)
    if matrix.size == 0:
        shape = (
            0 if rows is None else rows,
            (matrix.shape[1] if matrix.ndim == 2 else 0) if cols is None else cols,
        )
        if shape[0] * shape[1] != 0:
            raise ShapeMismatchError(name, (rows, cols), matrix.shape)
        matrix = matrix.reshape(shape)
    if matrix.ndim != 2:
        raise ShapeMismatchError(name, (rows, cols), matrix.shape)
    if (rows is not None and matrix.shape[0] != rows) or (
        cols is not None and matrix.shape[1] != cols
    ):
        raise ShapeMismatchError(name, (rows, cols), matrix.shape)
    return matrix
