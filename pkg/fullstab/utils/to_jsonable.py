"""Submodule converting report payloads into JSON-compatible objects."""

from typing import Any
import math
import numpy as np


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy containers and scalars into plain Python objects.

    Non-finite floats are written as the strings "inf", "-inf" and "nan",
    so that reports stay valid strict JSON.

    >>> to_jsonable({"a": np.array([1.0, np.inf]), "b": (np.int64(2),)})
    {'a': [1.0, 'inf'], 'b': [2]}
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value
