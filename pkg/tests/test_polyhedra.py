"""Tests for polyhedra, their cones and local Hausdorff distances."""

import numpy as np
import pytest
from fullstab.exceptions import InfeasiblePolyhedron, NotANormalVector, PointNotInSet
from fullstab.polyhedra import (
    PolyCone,
    Polyhedron,
    cone_difference_span,
    cone_min_curvature,
    critical_cone,
    face_enumeration,
    hausdorff_local,
    normal_cone,
    polytope_vertices,
    project,
    tangent_cone,
)

ORTHANT = Polyhedron.box([0.0, 0.0], [np.inf, np.inf])


def test_membership_and_infeasibility():
    """Membership follows the inequalities and empty systems are rejected."""
    square = Polyhedron.box([0.0, 0.0], [1.0, 1.0])
    assert square.contains(np.array([0.5, 0.5]))
    assert not square.contains(np.array([2.0, 0.0]))
    assert square.violation(np.array([2.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(InfeasiblePolyhedron):
        Polyhedron(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    with pytest.raises(InfeasiblePolyhedron):
        Polyhedron(np.array([[1.0, 1.0], [-1.0, -1.0]]), np.array([0.0, -1.0]))


def test_projection_onto_general_polyhedron():
    """Projection onto a half-plane goes along its normal."""
    halfplane = Polyhedron(np.array([[1.0, 1.0]]), np.array([1.0]))
    assert np.allclose(project(np.array([1.0, 1.0]), halfplane), [0.5, 0.5])
    assert np.allclose(project(np.array([-3.0, 0.0]), halfplane), [-3.0, 0.0])


def test_vertices_of_square():
    """The unit square has four vertices."""
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.array([1.0, 1.0, 0.0, 0.0])
    vertices = polytope_vertices(G, h)
    assert vertices.shape == (4, 2)
    assert {tuple(np.round(vertex, 9)) for vertex in vertices} == {
        (0.0, 0.0),
        (0.0, 1.0),
        (1.0, 0.0),
        (1.0, 1.0),
    }


def test_tangent_and_normal_cones_of_orthant():
    """At the origin of the orthant the tangent cone is the orthant and the normal cone its negative."""
    T = tangent_cone(ORTHANT, np.zeros(2))
    N = normal_cone(ORTHANT, np.zeros(2))
    assert T.contains(np.array([1.0, 1.0]))
    assert not T.contains(np.array([-1.0, 0.0]))
    assert N.contains(np.array([-1.0, -2.0]))
    assert not N.contains(np.array([1.0, 0.0]))
    assert N.contains_generated(np.array([-1.0, -2.0]))
    with pytest.raises(PointNotInSet):
        tangent_cone(ORTHANT, np.array([-1.0, 0.0]))


def test_critical_cone_and_its_span():
    """With v = (-1, 0) the critical cone is {0} x R+ and its span {0} x R."""
    K = critical_cone(ORTHANT, np.zeros(2), np.array([-1.0, 0.0]))
    assert K.contains(np.array([0.0, 1.0]))
    assert not K.contains(np.array([1.0, 0.0]))
    assert not K.contains(np.array([0.0, -1.0]))
    H = cone_difference_span(K)
    assert H.is_subspace
    assert H.lineality.shape[1] == 1
    assert H.contains(np.array([0.0, -1.0]))
    with pytest.raises(NotANormalVector):
        critical_cone(ORTHANT, np.zeros(2), np.array([1.0, 0.0]))


def test_polar_of_generated_cone():
    """The polar of the orthant is the nonpositive orthant."""
    cone = PolyCone.from_generators(np.eye(2))
    polar = cone.polar()
    assert polar.contains(np.array([-1.0, -1.0]))
    assert not polar.contains(np.array([1.0, -1.0]))
    assert not cone.is_subspace
    assert cone.span_dimension() == 2


def test_faces_of_orthant_cone():
    """The nonnegative quadrant has four faces."""
    cone = PolyCone(M=-np.eye(2))
    assert len(face_enumeration(cone)) == 4


def test_cone_min_curvature():
    """The curvature of an indefinite form depends on the cone it is minimized over."""
    H = np.diag([1.0, -1.0])
    value, witness = cone_min_curvature(H, np.zeros((0, 2)), np.eye(2))
    assert value == pytest.approx(-1.0)
    assert np.allclose(witness, [0.0, 1.0])
    value, _ = cone_min_curvature(H, np.array([[0.0, 1.0]]), np.eye(2))
    assert value == pytest.approx(1.0)
    value, witness = cone_min_curvature(H, np.eye(2), np.zeros((0, 2)))
    assert value == float("inf") and witness is None


def test_local_hausdorff_of_shifted_intervals():
    """Around the moving endpoint the local distance equals the shift."""
    C1 = Polyhedron(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))
    C2 = Polyhedron(np.array([[1.0], [-1.0]]), np.array([1.1, 0.0]))
    estimate = hausdorff_local(C1, C2, np.array([1.0]), 0.5, samples=20, seed=0)
    assert estimate.theta == pytest.approx(0.1)
    assert estimate.theta_upper >= estimate.theta - 1e-12
    far = hausdorff_local(C1, C2, np.array([0.25]), 0.25, samples=20, seed=0)
    assert far.theta == pytest.approx(0.0)
