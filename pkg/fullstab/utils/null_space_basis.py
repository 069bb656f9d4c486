"""Submodule providing an orthonormal basis of a null space."""

import numpy as np
from scipy.linalg import null_space

RANK_RTOL = 1e-9


def null_space_basis(matrix: np.ndarray, dimension: int) -> np.ndarray:
    """Return an orthonormal basis (as columns) of the null space of the matrix.

    Parameters
    ----------
    matrix : np.ndarray
        Matrix with `dimension` columns, possibly with zero rows.
    dimension : int
        Number of columns, needed when the matrix has no rows.
    """
    matrix = np.asarray(matrix, dtype=float).reshape(-1, dimension)
    if matrix.shape[0] == 0 or not np.any(matrix):
        return np.eye(dimension)
    return null_space(matrix, rcond=RANK_RTOL)
