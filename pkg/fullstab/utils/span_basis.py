"""Submodule providing an orthonormal basis of a span of vectors."""

import numpy as np
from scipy.linalg import orth

RANK_RTOL = 1e-9


def span_basis(columns: np.ndarray, dimension: int) -> np.ndarray:
    """Return an orthonormal basis (as columns) of the span of the given columns."""
    columns = np.asarray(columns, dtype=float).reshape(dimension, -1)
    if columns.shape[1] == 0 or not np.any(columns):
        return np.zeros((dimension, 0))
    return orth(columns, rcond=RANK_RTOL)
