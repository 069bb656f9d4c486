"""Submodule providing uniform samples from Euclidean balls."""

import numpy as np


def sample_ball(rng: np.random.Generator, dimension: int, radius: float) -> np.ndarray:
    """Return a point drawn uniformly from the closed ball of the given radius at the origin."""
    if dimension == 0:
        return np.zeros(0)
    direction = rng.normal(size=dimension)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros(dimension)
    return radius * rng.uniform() ** (1.0 / dimension) * direction / norm


def sample_sphere(rng: np.random.Generator, dimension: int) -> np.ndarray:
    """Return a point drawn uniformly from the unit sphere."""
    direction = rng.normal(size=dimension)
    while np.linalg.norm(direction) == 0.0:
        direction = rng.normal(size=dimension)
    return direction / np.linalg.norm(direction)
