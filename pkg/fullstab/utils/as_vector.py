"""Submodule providing coercion of array-likes into float vectors."""

from typing import Optional
import numpy as np
from fullstab.exceptions import ShapeMismatchError


def as_vector(values, size: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Return the provided values as a one-dimensional float array.

    Parameters
    ----------
    values : array-like or None
        Values to convert. None is read as the zero vector when the size is known.
    size : Optional[int]
        Expected length of the vector.
    name : str
        Name used in error messages.

    Raises
    ------
    ShapeMismatchError
        When the values are not one-dimensional or have the wrong length.
    """
    if values is None:
        if size is None:
            raise ShapeMismatchError(name, ("n",), ())
        return np.zeros(size)
    vector = np.atleast_1d(np.asarray(values, dtype=float))
    if vector.ndim != 1:
        raise ShapeMismatchError(name, (size if size is not None else -1,), vector.shape)
    if size is not None and vector.shape[0] != size:
        raise ShapeMismatchError(name, (size,), vector.shape)
    return vector
