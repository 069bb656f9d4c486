"""Utilities for the fullstab package."""

from fullstab.utils.as_vector import as_vector
from fullstab.utils.as_matrix import as_matrix
from fullstab.utils.null_space_basis import null_space_basis
from fullstab.utils.span_basis import span_basis
from fullstab.utils.restricted_min_eigenvalue import restricted_min_eigenvalue
from fullstab.utils.sample_ball import sample_ball, sample_sphere
from fullstab.utils.to_jsonable import to_jsonable
from fullstab.utils.fixture_path import fixture_path, list_fixtures

__all__ = [
    "as_vector",
    "as_matrix",
    "null_space_basis",
    "span_basis",
    "restricted_min_eigenvalue",
    "sample_ball",
    "sample_sphere",
    "to_jsonable",
    "fixture_path",
    "list_fixtures",
]
