"""Tests for the small linear-algebra and sampling helpers."""

import numpy as np
import pytest
from fullstab.exceptions import ShapeMismatchError
from fullstab.utils import (
    as_matrix,
    as_vector,
    fixture_path,
    list_fixtures,
    null_space_basis,
    restricted_min_eigenvalue,
    sample_ball,
    span_basis,
    to_jsonable,
)


def test_as_vector_defaults_and_sizes():
    """Missing vectors become zeros and wrong lengths are rejected."""
    assert np.array_equal(as_vector(None, 3), np.zeros(3))
    assert as_vector([], 0).shape == (0,)
    with pytest.raises(ShapeMismatchError):
        as_vector([1.0, 2.0], 3)


def test_as_matrix_keeps_empty_shapes():
    """Empty matrices keep the requested number of columns."""
    assert as_matrix([], cols=3).shape == (0, 3)
    assert as_matrix(None, 2, 0).shape == (2, 0)
    assert as_matrix(np.zeros((0, 4))).shape == (0, 4)
    with pytest.raises(ShapeMismatchError):
        as_matrix([], 2, 2)
    with pytest.raises(ShapeMismatchError):
        as_matrix([[1.0, 2.0]], 1, 3)


def test_null_space_and_span():
    """The null space of a single row is its orthogonal complement."""
    basis = null_space_basis(np.array([[1.0, 0.0, 0.0]]), 3)
    assert basis.shape == (3, 2)
    assert np.allclose(basis[0], 0.0)
    assert null_space_basis(np.zeros((0, 2)), 2).shape == (2, 2)
    assert span_basis(np.zeros((3, 0)), 3).shape == (3, 0)
    assert span_basis(np.array([[1.0, 2.0], [0.0, 0.0]]), 2).shape == (2, 1)


def test_restricted_min_eigenvalue():
    """The restricted eigenvalue ignores directions outside the subspace."""
    H = np.diag([1.0, -1.0])
    value, witness = restricted_min_eigenvalue(H, np.array([[1.0], [0.0]]))
    assert value == pytest.approx(1.0)
    assert np.allclose(np.abs(witness), [1.0, 0.0])
    assert restricted_min_eigenvalue(H, np.zeros((2, 0))) == (float("inf"), None)


def test_sample_ball_radius():
    """Samples stay inside the ball."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert np.linalg.norm(sample_ball(rng, 3, 0.5)) <= 0.5 + 1e-12
    assert sample_ball(rng, 0, 1.0).shape == (0,)


def test_to_jsonable_and_fixtures():
    """Infinite values are written as strings and every fixture is listed."""
    assert to_jsonable({"x": np.array([np.inf, -np.inf])}) == {"x": ["inf", "-inf"]}
    assert "ex94.json" in list_fixtures()
    assert fixture_path("ex94").endswith("ex94.json")
    with pytest.raises(FileNotFoundError):
        fixture_path("missing")
